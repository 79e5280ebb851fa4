/**
 * Browser entry point: wires the pure modules to the page. Everything that
 * has logic worth testing lives in api/rle/overlay/state; this file only
 * moves pixels and events between them and the DOM.
 */
import { ApiError, ConsoleApi, type PromptBody } from './api.js';
import { compositeOverlay, labelAnchors } from './overlay.js';
import { encodeRle } from './rle.js';
import {
  activeScene,
  applyError,
  applyResult,
  beginRequest,
  canSubmit,
  initialState,
  LAYERS,
  MODES,
  pointWithinScene,
  selectScene,
  setLayer,
  setMode,
  setOpacity,
  type ConsoleState,
  type PromptMode,
} from './state.js';

const api = new ConsoleApi(
  new URLSearchParams(location.search).get('api') ?? 'http://127.0.0.1:8000',
);

let state: ConsoleState = initialState();
let baseImage: ImageData | null = null;
let inflight: AbortController | null = null;
let dragStart: { x: number; y: number } | null = null;
let brush: Uint8Array | null = null;

const canvas = document.getElementById('view') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const sceneSelect = document.getElementById('scene') as HTMLSelectElement;
const layerBar = document.getElementById('layers') as HTMLDivElement;
const modeBar = document.getElementById('modes') as HTMLDivElement;
const opacitySlider = document.getElementById('opacity') as HTMLInputElement;
const errorLine = document.getElementById('error') as HTMLDivElement;
const resultLine = document.getElementById('result') as HTMLDivElement;

function setState(next: ConsoleState): void {
  state = next;
  render();
}

function canvasPoint(ev: MouseEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: Math.floor(((ev.clientX - rect.left) / rect.width) * canvas.width),
    y: Math.floor(((ev.clientY - rect.top) / rect.height) * canvas.height),
  };
}

async function loadBaseImage(): Promise<void> {
  const scene = activeScene(state);
  if (!scene) return;
  const img = new Image();
  img.crossOrigin = 'anonymous';
  img.src = api.layerUrl(scene.scene_id, state.layer);
  await img.decode();
  canvas.width = scene.width;
  canvas.height = scene.height;
  ctx.drawImage(img, 0, 0);
  baseImage = ctx.getImageData(0, 0, scene.width, scene.height);
  render();
}

function render(): void {
  errorLine.textContent = state.error ?? '';
  errorLine.hidden = state.error === null;
  const scene = activeScene(state);
  if (!scene || !baseImage) return;

  const segments = state.lastResult?.segments ?? [];
  const blended = compositeOverlay(
    new Uint8ClampedArray(baseImage.data),
    scene.width,
    scene.height,
    segments,
    state.opacity,
  );
  ctx.putImageData(new ImageData(new Uint8ClampedArray(blended), scene.width, scene.height), 0, 0);

  for (const box of state.lastResult?.boxes ?? []) {
    const [x0, y0, x1, y1] = box.xyxy;
    ctx.strokeStyle = '#ffffff';
    ctx.lineWidth = 1;
    ctx.strokeRect(x0 + 0.5, y0 + 0.5, x1 - x0 - 1, y1 - y0 - 1);
  }
  ctx.font = '10px sans-serif';
  for (const anchor of labelAnchors(segments, scene.width, scene.height)) {
    const w = ctx.measureText(anchor.text).width + 4;
    ctx.fillStyle = 'rgba(0,0,0,0.7)';
    ctx.fillRect(anchor.x - w / 2, anchor.y - 6, w, 12);
    ctx.fillStyle = '#ffffff';
    ctx.textAlign = 'center';
    ctx.textBaseline = 'middle';
    ctx.fillText(anchor.text, anchor.x, anchor.y);
  }
  resultLine.textContent = segments.length
    ? segments.map((s) => `${s.category_name} (${s.area}px)`).join(', ')
    : 'no selection';
}

async function submit(body: PromptBody): Promise<void> {
  if (!canSubmit(state)) return;
  inflight?.abort(); // a newer click replaces any pending request
  inflight = new AbortController();
  const begun = beginRequest(state);
  setState(begun.state);
  try {
    const result = await api.submitPrompt(state.sceneId!, body, inflight.signal);
    setState(applyResult(state, begun.token, result));
  } catch (err) {
    if (err instanceof DOMException && err.name === 'AbortError') return;
    const message = err instanceof ApiError ? err.message : String(err);
    setState(applyError(state, begun.token, message));
  }
}

function handleClick(ev: MouseEvent): void {
  const { x, y } = canvasPoint(ev);
  if (state.mode === 'point') {
    if (!pointWithinScene(state, x, y)) return; // rejected before any request
    void submit({ kind: 'point', point: [x, y] });
  } else if (state.mode === 'regular') {
    void submit({ kind: 'regular' });
  }
}

function handleDown(ev: MouseEvent): void {
  const scene = activeScene(state);
  if (!scene) return;
  const { x, y } = canvasPoint(ev);
  if (state.mode === 'box') {
    dragStart = { x, y };
  } else if (state.mode === 'mask-brush') {
    brush = new Uint8Array(scene.width * scene.height);
    paintBrush(x, y);
  }
}

function handleMove(ev: MouseEvent): void {
  if (state.mode === 'mask-brush' && brush !== null) {
    const { x, y } = canvasPoint(ev);
    paintBrush(x, y);
  }
}

function handleUp(ev: MouseEvent): void {
  const scene = activeScene(state);
  if (!scene) return;
  const { x, y } = canvasPoint(ev);
  if (state.mode === 'box' && dragStart !== null) {
    const box: [number, number, number, number] = [
      Math.min(dragStart.x, x),
      Math.min(dragStart.y, y),
      Math.max(dragStart.x, x) + 1,
      Math.max(dragStart.y, y) + 1,
    ];
    dragStart = null;
    void submit({ kind: 'box', box });
  } else if (state.mode === 'mask-brush' && brush !== null) {
    const counts = encodeRle(brush, scene.width, scene.height);
    brush = null;
    void submit({ kind: 'mask', rle: counts });
  }
}

/** Brush strokes are rasterized client-side to the image grid, radius 3. */
function paintBrush(cx: number, cy: number): void {
  const scene = activeScene(state);
  if (!scene || brush === null) return;
  for (let dy = -3; dy <= 3; dy++) {
    for (let dx = -3; dx <= 3; dx++) {
      const x = cx + dx;
      const y = cy + dy;
      if (dx * dx + dy * dy <= 9 && x >= 0 && y >= 0 && x < scene.width && y < scene.height) {
        brush[y * scene.width + x] = 1;
      }
    }
  }
}

function buildControls(): void {
  for (const layer of LAYERS) {
    const btn = document.createElement('button');
    btn.textContent = layer;
    btn.dataset.layer = layer;
    btn.addEventListener('click', () => {
      setState(setLayer(state, layer));
      void loadBaseImage();
    });
    layerBar.appendChild(btn);
  }
  for (const mode of MODES) {
    const btn = document.createElement('button');
    btn.textContent = mode;
    btn.dataset.mode = mode;
    btn.addEventListener('click', () => setState(setMode(state, mode as PromptMode)));
    modeBar.appendChild(btn);
  }
  opacitySlider.addEventListener('input', () => {
    setState(setOpacity(state, Number(opacitySlider.value) / 100));
  });
  sceneSelect.addEventListener('change', () => {
    setState(selectScene(state, sceneSelect.value));
    void loadBaseImage();
  });
  canvas.addEventListener('click', handleClick);
  canvas.addEventListener('mousedown', handleDown);
  canvas.addEventListener('mousemove', handleMove);
  canvas.addEventListener('mouseup', handleUp);
}

async function init(): Promise<void> {
  buildControls();
  const scenes = await api.listScenes();
  setState({ ...initialState(), scenes, sceneId: scenes[0]?.scene_id ?? null });
  sceneSelect.replaceChildren(
    ...scenes.map((s) => {
      const opt = document.createElement('option');
      opt.value = s.scene_id;
      opt.textContent = `${s.scene_id} (${s.width}x${s.height})`;
      return opt;
    }),
  );
  await loadBaseImage();
}

void init();
