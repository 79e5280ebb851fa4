/**
 * Console state and its transitions, written as pure functions so the rules
 * (single in-flight request, errors never clear the last overlay, no request
 * without a valid scene and mode) are unit-testable without a DOM.
 */
import type { LayerName, PromptResponse, SceneInfo } from './api.js';

export type PromptMode = 'point' | 'box' | 'mask-brush' | 'regular';

export const LAYERS: LayerName[] = ['semantic', 'enhanced', 'instance', 'panoptic'];
export const MODES: PromptMode[] = ['point', 'box', 'mask-brush', 'regular'];

export interface ConsoleState {
  scenes: SceneInfo[];
  sceneId: string | null;
  layer: LayerName;
  mode: PromptMode;
  opacity: number;
  lastResult: PromptResponse | null;
  error: string | null;
  /** Token of the newest request; responses carrying an older token are stale. */
  requestToken: number;
  pending: boolean;
}

export function initialState(): ConsoleState {
  return {
    scenes: [],
    sceneId: null,
    layer: 'semantic',
    mode: 'point',
    opacity: 0.6,
    lastResult: null,
    error: null,
    requestToken: 0,
    pending: false,
  };
}

export function withScenes(state: ConsoleState, scenes: SceneInfo[]): ConsoleState {
  const sceneId = scenes.some((s) => s.scene_id === state.sceneId)
    ? state.sceneId
    : (scenes[0]?.scene_id ?? null);
  return { ...state, scenes, sceneId };
}

export function selectScene(state: ConsoleState, sceneId: string): ConsoleState {
  if (!state.scenes.some((s) => s.scene_id === sceneId)) {
    throw new Error(`unknown scene ${sceneId}`);
  }
  // a prompt result from one scene must never be drawn over another
  return { ...state, sceneId, lastResult: null, error: null };
}

export function setLayer(state: ConsoleState, layer: LayerName): ConsoleState {
  if (!LAYERS.includes(layer)) throw new Error(`unknown layer ${layer}`);
  return { ...state, layer };
}

export function setMode(state: ConsoleState, mode: PromptMode): ConsoleState {
  if (!MODES.includes(mode)) throw new Error(`unknown mode ${mode}`);
  return { ...state, mode };
}

export function setOpacity(state: ConsoleState, opacity: number): ConsoleState {
  return { ...state, opacity: Math.min(1, Math.max(0, opacity)) };
}

export function activeScene(state: ConsoleState): SceneInfo | null {
  return state.scenes.find((s) => s.scene_id === state.sceneId) ?? null;
}

/** True only when a request may be sent at all. */
export function canSubmit(state: ConsoleState): boolean {
  return state.sceneId !== null && MODES.includes(state.mode);
}

/** Client-side bounds check; clicks outside the image never become requests. */
export function pointWithinScene(state: ConsoleState, x: number, y: number): boolean {
  const scene = activeScene(state);
  return scene !== null && x >= 0 && y >= 0 && x < scene.width && y < scene.height;
}

/**
 * Start a request: bumps the token so any response still in flight from an
 * earlier click is recognized as stale and dropped.
 */
export function beginRequest(state: ConsoleState): { state: ConsoleState; token: number } {
  if (!canSubmit(state)) throw new Error('no scene selected');
  const token = state.requestToken + 1;
  return { state: { ...state, requestToken: token, pending: true }, token };
}

export function applyResult(
  state: ConsoleState,
  token: number,
  result: PromptResponse,
): ConsoleState {
  if (token !== state.requestToken) return state; // a newer click superseded this one
  return { ...state, lastResult: result, error: null, pending: false };
}

/** A failed request shows its message but keeps the previous overlay. */
export function applyError(state: ConsoleState, token: number, message: string): ConsoleState {
  if (token !== state.requestToken) return state;
  return { ...state, error: message, pending: false };
}
