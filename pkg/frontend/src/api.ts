/**
 * Typed client for the segmentation service. All calls go through a single
 * configurable base URL; nothing here touches the DOM.
 */

export type LayerName = 'semantic' | 'enhanced' | 'instance' | 'panoptic';

export interface SceneInfo {
  scene_id: string;
  width: number;
  height: number;
  has_detections: boolean;
  has_image: boolean;
}

export interface SegmentPayload {
  segment_id: number;
  category_id: number;
  category_name: string;
  source: 'food' | 'nonfood';
  area: number;
  rle: number[];
  color: [number, number, number];
}

export interface BoxPayload {
  index: number;
  xyxy: [number, number, number, number];
  score: number;
  category_id: number;
  label: string;
}

export interface PromptResponse {
  scene_id: string;
  segments: SegmentPayload[];
  box_ids: number[];
  boxes: BoxPayload[];
}

export interface PromptBody {
  kind: 'point' | 'box' | 'mask' | 'regular';
  point?: [number, number];
  box?: [number, number, number, number];
  rle?: number[];
  params?: Record<string, unknown>;
}

/** Non-2xx response, carrying the service's error detail when present. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = 'ApiError';
  }
}

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: string };
    if (typeof body.detail === 'string') return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `${res.status} ${res.statusText}`;
}

export class ConsoleApi {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  async listScenes(): Promise<SceneInfo[]> {
    const res = await fetch(this.url('/scenes'));
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as SceneInfo[];
  }

  /** Layer PNGs are loaded by the browser directly; only the URL is built here. */
  layerUrl(sceneId: string, layer: LayerName): string {
    return this.url(`/scenes/${encodeURIComponent(sceneId)}/layers?layer=${layer}`);
  }

  imageUrl(sceneId: string): string {
    return this.url(`/scenes/${encodeURIComponent(sceneId)}/image`);
  }

  async submitPrompt(
    sceneId: string,
    body: PromptBody,
    signal?: AbortSignal,
  ): Promise<PromptResponse> {
    const res = await fetch(this.url(`/scenes/${encodeURIComponent(sceneId)}/prompt`), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as PromptResponse;
  }
}
