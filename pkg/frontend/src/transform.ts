/**
 * View transform between screen (canvas) and scene (image pixel) space.
 *
 * A point at scene coordinate p renders at screen coordinate p * zoom + pan;
 * the inverse (screen - pan) / zoom recovers scene coordinates from clicks.
 */

export interface ViewTransform {
  panX: number;
  panY: number;
  zoom: number;
}

export interface Point {
  x: number;
  y: number;
}

export const MIN_ZOOM = 0.2;
export const MAX_ZOOM = 16;

export function identity(): ViewTransform {
  return { panX: 0, panY: 0, zoom: 1 };
}

export function screenToScene(t: ViewTransform, sx: number, sy: number): Point {
  return { x: (sx - t.panX) / t.zoom, y: (sy - t.panY) / t.zoom };
}

export function sceneToScreen(t: ViewTransform, x: number, y: number): Point {
  return { x: x * t.zoom + t.panX, y: y * t.zoom + t.panY };
}

export function panned(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { panX: t.panX + dx, panY: t.panY + dy, zoom: t.zoom };
}

/** Zoom by `factor`, keeping the scene point under (sx, sy) anchored there. */
export function zoomAt(t: ViewTransform, sx: number, sy: number, factor: number): ViewTransform {
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, t.zoom * factor));
  const anchor = screenToScene(t, sx, sy);
  return {
    zoom,
    panX: sx - anchor.x * zoom,
    panY: sy - anchor.y * zoom,
  };
}

/** Fit a scene of the given size into a viewport, centered with a margin. */
export function fitToView(sceneW: number, sceneH: number, viewW: number, viewH: number): ViewTransform {
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, 0.95 * Math.min(viewW / sceneW, viewH / sceneH)));
  return {
    zoom,
    panX: (viewW - sceneW * zoom) / 2,
    panY: (viewH - sceneH * zoom) / 2,
  };
}
