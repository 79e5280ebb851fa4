"""HTTP API over a scene corpus.

Layers are computed lazily with default parameters and cached; prompt requests
may override parameters, and each distinct parameter set is cached separately
per scene.  All endpoints are safe to call concurrently.
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import asdict
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel, Field

from .assembly import AssemblyParams
from .cli import SceneEntry, discover_scenes
from .core import CategoryTable, load_categories
from .errors import FoodFuseError
from .fusion import FusionParams
from .mask_io import (
    SceneBundle,
    colorize_segments,
    encode_label_png,
    encode_rgb_png,
    load_scene,
    rle_decode,
)
from .pipeline import SceneResult, compute_scene
from .prompts import Prompt, promptable_segment, result_to_json

log = logging.getLogger("foodfuse.server")

LAYERS = ("semantic", "enhanced", "instance", "panoptic")

FUSION_KEYS = {"tau", "topk", "sort", "skip_background_paint"}
ASSEMBLY_KEYS = {"min_area", "merge_dist", "iou_thresh", "pixel_iou"}
PROMPT_KEYS = {"samples", "seed"}


class PromptRequest(BaseModel):
    """Body of POST /scenes/{id}/prompt."""

    kind: str
    point: tuple[float, float] | None = None
    box: tuple[float, float, float, float] | None = None
    rle: list[int] | None = None
    params: dict[str, Any] = Field(default_factory=dict)


def _split_params(overrides: dict[str, Any]) -> tuple[FusionParams, AssemblyParams, int, int]:
    unknown = set(overrides) - FUSION_KEYS - ASSEMBLY_KEYS - PROMPT_KEYS
    if unknown:
        raise HTTPException(400, f"unknown params: {', '.join(sorted(unknown))}")
    try:
        fusion = FusionParams(
            tau=float(overrides.get("tau", 0.5)),
            top_k=None if overrides.get("topk") is None else int(overrides["topk"]),
            sort_order=str(overrides.get("sort", "area_desc")),
            skip_background_paint=bool(overrides.get("skip_background_paint", False)),
        )
        assembly = AssemblyParams(
            min_area_ratio=float(overrides.get("min_area", 0.005)),
            merge_distance=float(overrides.get("merge_dist", 0.1)),
            panoptic_iou_thresh=float(overrides.get("iou_thresh", 0.5)),
            pixel_iou=bool(overrides.get("pixel_iou", False)),
        )
        samples = int(overrides.get("samples", 32))
        seed = int(overrides.get("seed", 0))
    except (TypeError, ValueError, FoodFuseError) as exc:
        raise HTTPException(400, f"bad params: {exc}") from exc
    return fusion, assembly, samples, seed


def _param_key(fusion: FusionParams, assembly: AssemblyParams) -> str:
    blob = json.dumps([asdict(fusion), asdict(assembly)], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class SceneStore:
    """Loads scenes on demand and caches computed results per parameter set."""

    def __init__(self, data_root: Path):
        self.root = Path(data_root)
        self.categories: CategoryTable = load_categories(self.root / "categories.tsv")
        self.entries: dict[str, SceneEntry] = {
            e.scene_id: e for e in discover_scenes(self.root, require_nonempty=False)
        }
        self.dims: dict[str, tuple[int, int]] = {}
        for scene_id, entry in self.entries.items():
            with Image.open(entry.semantic) as im:
                self.dims[scene_id] = im.size  # (width, height)
        self._bundles: dict[str, SceneBundle] = {}
        self._results: dict[tuple[str, str], SceneResult] = {}
        self._layer_png: dict[tuple[str, str], bytes] = {}
        self._guard = threading.Lock()
        self._locks: dict[Any, threading.Lock] = {}

    def _lock(self, key: Any) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def scene_ids(self) -> list[str]:
        return sorted(self.entries)

    def entry(self, scene_id: str) -> SceneEntry:
        try:
            return self.entries[scene_id]
        except KeyError:
            raise HTTPException(404, f"unknown scene {scene_id!r}") from None

    def bundle(self, scene_id: str) -> SceneBundle:
        entry = self.entry(scene_id)
        if scene_id in self._bundles:
            return self._bundles[scene_id]
        with self._lock(("bundle", scene_id)):
            if scene_id not in self._bundles:
                self._bundles[scene_id] = load_scene(
                    semantic_path=entry.semantic,
                    mask_dir=entry.sam_dir,
                    categories=self.categories,
                    detections_path=entry.detections,
                    image_path=entry.image,
                )
        return self._bundles[scene_id]

    def result(self, scene_id: str, fusion: FusionParams, assembly: AssemblyParams) -> SceneResult:
        key = (scene_id, _param_key(fusion, assembly))
        if key in self._results:
            return self._results[key]
        bundle = self.bundle(scene_id)
        with self._lock(("result",) + key):
            if key not in self._results:
                log.info("computing scene %s (params %s)", scene_id, key[1])
                self._results[key] = compute_scene(bundle, fusion, assembly)
        return self._results[key]

    def layer_png(self, scene_id: str, layer: str) -> bytes:
        entry = self.entry(scene_id)
        if layer == "semantic":
            return entry.semantic.read_bytes()  # verbatim input bytes
        key = (scene_id, layer)
        if key in self._layer_png:
            return self._layer_png[key]
        result = self.result(scene_id, FusionParams(), AssemblyParams())
        with self._lock(("layer",) + key):
            if key not in self._layer_png:
                if layer == "enhanced":
                    png = encode_label_png(result.enhanced)
                elif layer == "instance":
                    png = encode_rgb_png(colorize_segments(result.instances.id_grid))
                else:
                    png = encode_rgb_png(colorize_segments(result.panoptic.id_grid))
                self._layer_png[key] = png
        return self._layer_png[key]

    def preload(self) -> None:
        for scene_id in self.scene_ids():
            self.result(scene_id, FusionParams(), AssemblyParams())


def create_app(data_root: str | Path, preload: bool = False) -> FastAPI:
    store = SceneStore(Path(data_root))
    if preload:
        store.preload()

    app = FastAPI(title="foodfuse", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    @app.get("/scenes")
    def scenes() -> JSONResponse:
        payload = [
            {
                "scene_id": scene_id,
                "width": store.dims[scene_id][0],
                "height": store.dims[scene_id][1],
                "has_detections": store.entries[scene_id].detections is not None,
                "has_image": store.entries[scene_id].image is not None,
            }
            for scene_id in store.scene_ids()
        ]
        return JSONResponse(payload)

    @app.get("/scenes/{scene_id}/layers")
    def layers(scene_id: str, layer: str = "semantic") -> Response:
        if layer not in LAYERS:
            raise HTTPException(400, f"layer must be one of {', '.join(LAYERS)}")
        try:
            png = store.layer_png(scene_id, layer)
        except FoodFuseError as exc:
            raise HTTPException(400, str(exc)) from exc
        return Response(content=png, media_type="image/png")

    @app.get("/scenes/{scene_id}/image")
    def image(scene_id: str) -> Response:
        entry = store.entry(scene_id)
        if entry.image is None:
            raise HTTPException(404, f"scene {scene_id!r} has no image")
        return Response(content=entry.image.read_bytes(), media_type="image/png")

    @app.post("/scenes/{scene_id}/prompt")
    def prompt(scene_id: str, body: PromptRequest) -> JSONResponse:
        fusion, assembly, samples, seed = _split_params(body.params)
        bundle = store.bundle(scene_id)
        try:
            if body.kind == "mask":
                if body.rle is None:
                    raise HTTPException(400, "mask prompt needs 'rle'")
                mask = rle_decode(body.rle, bundle.size)
                request = Prompt(kind="mask", mask=mask)
            elif body.kind == "point":
                if body.point is None:
                    raise HTTPException(400, "point prompt needs 'point'")
                request = Prompt(kind="point", point=tuple(body.point))
            elif body.kind == "box":
                if body.box is None:
                    raise HTTPException(400, "box prompt needs 'box'")
                request = Prompt(kind="box", box=tuple(body.box))
            elif body.kind == "regular":
                request = Prompt(kind="regular")
            else:
                raise HTTPException(400, f"unknown prompt kind {body.kind!r}")
            result_all = store.result(scene_id, fusion, assembly)
            selection = promptable_segment(
                result_all.panoptic,
                bundle.detections,
                request,
                n_samples=samples,
                seed=seed,
            )
        except FoodFuseError as exc:
            raise HTTPException(400, str(exc)) from exc
        payload = result_to_json(selection, store.categories, bundle.detections)
        payload["scene_id"] = scene_id
        return JSONResponse(payload)

    return app
