/**
 * Canvas wiring: rendering, pan/zoom gestures, click-to-place markers,
 * keyboard shortcuts.  All dataset state lives in the AnnotationSession.
 *
 * Interactions:
 *   click           place a crop at the clicked crown center
 *   drag            pan
 *   wheel           zoom anchored at the pointer
 *   x               toggle palm / no-palm label mode
 *   u               undo the most recent marker
 *   n               sample 10 random negatives
 */

import { ApiClient, SceneInfo } from "./api.js";
import { AnnotationSession } from "./session.js";
import { panned, sceneToScreen, zoomAt, fitToView } from "./transform.js";

const MARKER_COLORS = { palm: "#2ecc40", no_palm: "#ff4136" } as const;
const DRAG_THRESHOLD_PX = 4;

export class AnnotatorApp {
  private readonly session: AnnotationSession;
  private readonly ctx: CanvasRenderingContext2D;
  private image: HTMLImageElement | null = null;
  private dragging = false;
  private moved = false;
  private lastPointer = { x: 0, y: 0 };

  constructor(
    private readonly api: ApiClient,
    private readonly canvas: HTMLCanvasElement,
    private readonly hud: HTMLElement,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    this.session = new AnnotationSession(api);
    this.bindEvents();
  }

  async start(sceneSelect: HTMLSelectElement): Promise<void> {
    const scenes = await this.api.listScenes();
    if (scenes.length === 0) {
      this.hud.textContent = "no scenes found; start the server with --data pointing at scenes/";
      return;
    }
    for (const scene of scenes) {
      const option = document.createElement("option");
      option.value = scene.scene_id;
      option.textContent = `${scene.scene_id} (${scene.width}x${scene.height})`;
      sceneSelect.appendChild(option);
    }
    sceneSelect.onchange = () => {
      const info = scenes.find((s) => s.scene_id === sceneSelect.value);
      if (info) void this.openScene(info);
    };
    await this.openScene(scenes[0]);
  }

  private async openScene(info: SceneInfo): Promise<void> {
    await this.session.loadScene(info);
    this.image = await loadImage(this.api.sceneImageUrl(info.scene_id));
    this.session.transform = fitToView(info.width, info.height,
                                       this.canvas.width, this.canvas.height);
    this.render();
  }

  private bindEvents(): void {
    this.canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.moved = false;
      this.lastPointer = { x: e.offsetX, y: e.offsetY };
      this.canvas.setPointerCapture(e.pointerId);
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      const dx = e.offsetX - this.lastPointer.x;
      const dy = e.offsetY - this.lastPointer.y;
      if (Math.abs(dx) + Math.abs(dy) > DRAG_THRESHOLD_PX) this.moved = true;
      if (this.moved) {
        this.session.transform = panned(this.session.transform, dx, dy);
        this.lastPointer = { x: e.offsetX, y: e.offsetY };
        this.render();
      }
    });
    this.canvas.addEventListener("pointerup", (e) => {
      this.dragging = false;
      if (!this.moved) void this.handleClick(e.offsetX, e.offsetY);
    });
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      const factor = e.deltaY < 0 ? 1.2 : 1 / 1.2;
      this.session.transform = zoomAt(this.session.transform, e.offsetX, e.offsetY, factor);
      this.render();
    }, { passive: false });
    window.addEventListener("keydown", (e) => {
      if (e.key === "x") {
        this.session.toggleMode();
        this.render();
      } else if (e.key === "u") {
        void this.session.undoLast().then(() => this.render());
      } else if (e.key === "n") {
        void this.session.sampleNegatives(10).then(() => this.render());
      }
    });
  }

  private async handleClick(sx: number, sy: number): Promise<void> {
    const result = await this.session.placeMarker(sx, sy);
    if (!result.ok) this.session.notice = result.reason;
    this.render();
  }

  render(): void {
    const { ctx, canvas } = this;
    const t = this.session.transform;
    ctx.fillStyle = "#14171a";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (this.image) {
      ctx.imageSmoothingEnabled = t.zoom < 1;
      ctx.setTransform(t.zoom, 0, 0, t.zoom, t.panX, t.panY);
      ctx.drawImage(this.image, 0, 0);
      ctx.setTransform(1, 0, 0, 1, 0, 0);
    }
    for (const marker of this.session.markers) {
      const p = sceneToScreen(t, marker.cx, marker.cy);
      ctx.beginPath();
      ctx.arc(p.x, p.y, 6, 0, 2 * Math.PI);
      ctx.strokeStyle = MARKER_COLORS[marker.label];
      ctx.lineWidth = 2;
      ctx.stroke();
      ctx.beginPath();
      ctx.arc(p.x, p.y, 1.5, 0, 2 * Math.PI);
      ctx.fillStyle = MARKER_COLORS[marker.label];
      ctx.fill();
    }
    const { palm, noPalm } = this.session.counters;
    this.hud.innerHTML =
      `mode <b style="color:${MARKER_COLORS[this.session.mode]}">${this.session.mode}</b> (x) · ` +
      `palm <b>${palm}</b> · no-palm <b>${noPalm}</b> · undo (u) · negatives (n) · ` +
      `zoom ${t.zoom.toFixed(2)}` +
      (this.session.notice ? ` · <i>${this.session.notice}</i>` : "");
    this.session.notice = "";
  }
}

function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`failed to load ${url}`));
    img.src = url;
  });
}
