import { ApiClient } from "./api.js";
import { AnnotatorApp } from "./app.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

const canvas = byId<HTMLCanvasElement>("view");
canvas.width = canvas.clientWidth;
canvas.height = canvas.clientHeight;

const app = new AnnotatorApp(new ApiClient(), canvas, byId("hud"));
window.addEventListener("resize", () => {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  app.render();
});

void app.start(byId<HTMLSelectElement>("scene-select"));
