/** Typed client for the palmcount annotation API. */

export type Label = "palm" | "no_palm";

export interface SceneInfo {
  scene_id: string;
  width: number;
  height: number;
}

export interface CreatedCrop {
  crop_id: string;
  cx: number;
  cy: number;
}

export interface Stats {
  palm_count: number;
  no_palm_count: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listScenes(): Promise<SceneInfo[]> {
    return this.request<SceneInfo[]>("/api/scenes");
  }

  sceneImageUrl(sceneId: string): string {
    return `${this.base}/api/scenes/${encodeURIComponent(sceneId)}/image`;
  }

  addCrop(sceneId: string, cx: number, cy: number, label: Label): Promise<{ crop_id: string }> {
    return this.request("/api/crops", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ scene_id: sceneId, cx, cy, label }),
    });
  }

  deleteCrop(cropId: string): Promise<{ deleted: string }> {
    return this.request(`/api/crops/${encodeURIComponent(cropId)}`, { method: "DELETE" });
  }

  sampleNegatives(sceneId: string, count: number, minDist: number): Promise<CreatedCrop[]> {
    return this.request("/api/negatives/sample", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ scene_id: sceneId, count, min_dist: minDist }),
    });
  }

  stats(): Promise<Stats> {
    return this.request<Stats>("/api/stats");
  }
}
