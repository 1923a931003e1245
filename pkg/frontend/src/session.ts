/**
 * Annotation session state: the active scene, view transform, label mode,
 * markers mirroring server-side crops, and class counters.
 *
 * Markers are never drawn optimistically: every mutation waits for the
 * server acknowledgment, then the counters are refreshed from /api/stats,
 * so the UI state always equals the persisted dataset.
 */

import { ApiClient, ApiError, Label, SceneInfo } from "./api.js";
import { identity, screenToScene, ViewTransform } from "./transform.js";

export interface Marker {
  cropId: string;
  cx: number;
  cy: number;
  label: Label;
}

export interface Counters {
  palm: number;
  noPalm: number;
}

export type PlaceResult =
  | { ok: true; marker: Marker }
  | { ok: false; reason: string };

export class AnnotationSession {
  scene: SceneInfo | null = null;
  transform: ViewTransform = identity();
  mode: Label = "palm";
  markers: Marker[] = [];
  counters: Counters = { palm: 0, noPalm: 0 };
  notice = "";

  constructor(private readonly api: ApiClient) {}

  async loadScene(scene: SceneInfo): Promise<void> {
    this.scene = scene;
    this.markers = [];
    this.transform = identity();
    await this.refreshStats();
  }

  toggleMode(): Label {
    this.mode = this.mode === "palm" ? "no_palm" : "palm";
    return this.mode;
  }

  /** Convert a screen click to scene pixels and create a crop there. */
  async placeMarker(screenX: number, screenY: number): Promise<PlaceResult> {
    if (!this.scene) {
      return { ok: false, reason: "no scene loaded" };
    }
    const p = screenToScene(this.transform, screenX, screenY);
    const cx = Math.round(p.x);
    const cy = Math.round(p.y);
    try {
      const { crop_id } = await this.api.addCrop(this.scene.scene_id, cx, cy, this.mode);
      const marker: Marker = { cropId: crop_id, cx, cy, label: this.mode };
      this.markers.push(marker);
      await this.refreshStats();
      return { ok: true, marker };
    } catch (err) {
      const reason = err instanceof ApiError ? err.message : `network failure: ${err}`;
      this.notice = reason;
      return { ok: false, reason };
    }
  }

  /** Delete the most recently placed marker (server-side undo). */
  async undoLast(): Promise<boolean> {
    const last = this.markers[this.markers.length - 1];
    if (!last) {
      this.notice = "nothing to undo";
      return false;
    }
    await this.api.deleteCrop(last.cropId);
    this.markers.pop();
    await this.refreshStats();
    return true;
  }

  async sampleNegatives(count: number, minDist = 20): Promise<number> {
    if (!this.scene) {
      this.notice = "no scene loaded";
      return 0;
    }
    if (count <= 0) {
      return 0;
    }
    try {
      const created = await this.api.sampleNegatives(this.scene.scene_id, count, minDist);
      for (const crop of created) {
        this.markers.push({ cropId: crop.crop_id, cx: crop.cx, cy: crop.cy, label: "no_palm" });
      }
      await this.refreshStats();
      return created.length;
    } catch (err) {
      this.notice = err instanceof ApiError ? err.message : `network failure: ${err}`;
      return 0;
    }
  }

  async refreshStats(): Promise<void> {
    const stats = await this.api.stats();
    this.counters = { palm: stats.palm_count, noPalm: stats.no_palm_count };
  }
}
