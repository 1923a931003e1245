import { describe, expect, it } from "vitest";

import {
  fitToView,
  identity,
  panned,
  sceneToScreen,
  screenToScene,
  zoomAt,
  ViewTransform,
} from "../src/transform.js";

describe("screen/scene mapping", () => {
  it("computes crop centers as (screen - pan) / zoom", () => {
    const t: ViewTransform = { panX: 100, panY: 50, zoom: 2 };
    const p = screenToScene(t, 300, 250);
    expect(p.x).toBeCloseTo((300 - 100) / 2, 10);
    expect(p.y).toBeCloseTo((250 - 50) / 2, 10);
  });

  it("maps within 1 px of the analytic inverse at the required zoom levels", () => {
    // marker placement at zoom 0.5/1/2/4 and arbitrary pans
    const pans = [
      { panX: 0, panY: 0 },
      { panX: 137.25, panY: -83.5 },
      { panX: -421, panY: 962 },
    ];
    for (const zoom of [0.5, 1, 2, 4]) {
      for (const pan of pans) {
        const t: ViewTransform = { ...pan, zoom };
        for (const [sx, sy] of [[12.3, 872.1], [640, 360], [0.5, 0.5]]) {
          const scene = screenToScene(t, sx, sy);
          const analyticX = (sx - pan.panX) / zoom;
          const analyticY = (sy - pan.panY) / zoom;
          expect(Math.abs(scene.x - analyticX)).toBeLessThanOrEqual(1);
          expect(Math.abs(scene.y - analyticY)).toBeLessThanOrEqual(1);
          const back = sceneToScreen(t, scene.x, scene.y);
          expect(back.x).toBeCloseTo(sx, 6);
          expect(back.y).toBeCloseTo(sy, 6);
        }
      }
    }
  });

  it("round trips marker screen positions within 1 px at any zoom", () => {
    // placing a marker at the screen position of an existing marker must
    // recover its scene coordinates
    let t = identity();
    t = zoomAt(t, 317, 204, 2.7);
    t = panned(t, -44, 91);
    t = zoomAt(t, 12, 640, 0.31);
    const marker = { cx: 412, cy: 378 };
    const screen = sceneToScreen(t, marker.cx, marker.cy);
    const recovered = screenToScene(t, screen.x, screen.y);
    expect(Math.abs(recovered.x - marker.cx)).toBeLessThanOrEqual(1);
    expect(Math.abs(recovered.y - marker.cy)).toBeLessThanOrEqual(1);
  });
});

describe("zoomAt", () => {
  it("anchors the scene point under the pointer", () => {
    const t: ViewTransform = { panX: 25, panY: -60, zoom: 1.5 };
    const before = screenToScene(t, 400, 300);
    const zoomed = zoomAt(t, 400, 300, 2);
    const after = screenToScene(zoomed, 400, 300);
    expect(after.x).toBeCloseTo(before.x, 8);
    expect(after.y).toBeCloseTo(before.y, 8);
    expect(zoomed.zoom).toBeCloseTo(3, 10);
  });

  it("clamps the zoom range", () => {
    const tiny = zoomAt(identity(), 0, 0, 1e-6);
    const huge = zoomAt(identity(), 0, 0, 1e6);
    expect(tiny.zoom).toBeGreaterThan(0);
    expect(huge.zoom).toBeLessThanOrEqual(16);
  });
});

describe("fitToView", () => {
  it("centers the scene inside the viewport", () => {
    const t = fitToView(800, 800, 1200, 900);
    const topLeft = sceneToScreen(t, 0, 0);
    const bottomRight = sceneToScreen(t, 800, 800);
    expect(topLeft.x).toBeGreaterThanOrEqual(0);
    expect(topLeft.y).toBeGreaterThanOrEqual(0);
    expect(bottomRight.x).toBeLessThanOrEqual(1200);
    expect(bottomRight.y).toBeLessThanOrEqual(900);
    // centered horizontally
    expect(topLeft.x).toBeCloseTo(1200 - bottomRight.x, 6);
  });
});
