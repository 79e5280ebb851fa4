"""Command line front end.

Subcommands mirror the pipeline stages: enhance, instance, panoptic, prompt,
eval, sweep, serve.  Every run that writes into an output directory also
writes a manifest.json recording the effective config, sha256 of each input,
and the package version, so reruns can be compared byte for byte (the
created_at stamp is the only field allowed to differ).

Exit codes: 0 success, 1 usage or input validation failure, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .assembly import AssemblyParams
from .core import CategoryTable, LabelMap, load_categories
from .errors import FoodFuseError, MissingPairError
from .fusion import (
    SORT_ORDERS,
    FusionParams,
    enhance,
    enhance_from_votes,
    top_k_by_area,
    vote_mask_label,
)
from .mask_io import (
    SceneBundle,
    load_label_map,
    load_scene,
    save_instance_map,
    save_label_map,
    save_panoptic_map,
)
from .metrics import confusion_matrix, evaluate_dir, report_from_matrix
from .pipeline import compute_scene, votes_payload
from .prompts import Prompt, promptable_segment, result_to_json

log = logging.getLogger("foodfuse.cli")

ENV_LOG = "FOODFUSE_LOG"


# ---------------------------------------------------------------------------
# argument plumbing


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so run() controls exit codes."""

    def error(self, message: str):  # noqa: D102 - argparse hook
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _add_fusion_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, default=0.5, help="confusion threshold, keep votes >= tau")
    p.add_argument("--topk", type=int, default=None, help="keep only the K largest masks before voting")
    p.add_argument("--sort", choices=SORT_ORDERS, default="area_desc", help="paint order for merging")
    p.add_argument(
        "--skip-background-paint",
        action="store_true",
        help="do not paint masks whose vote is the background class",
    )


def _add_assembly_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-area", type=float, default=0.005, help="small-mask cutoff as a fraction of image area")
    p.add_argument("--merge-dist", type=float, default=0.1, help="max centroid distance for absorbing small masks, as a fraction of the image diagonal")
    p.add_argument("--iou-thresh", type=float, default=0.5, help="min box IoU for matching background masks to detections")
    p.add_argument("--pixel-iou", action="store_true", help="use pixel counts inside the box instead of tight-bbox IoU")


def _add_input_args(p: argparse.ArgumentParser, corpus: bool, detections: bool) -> None:
    p.add_argument("--semantic", type=Path, help="coarse label map PNG (single-scene mode)")
    p.add_argument("--sam-dir", type=Path, help="directory of mask proposals with metadata.csv")
    p.add_argument("--categories", type=Path, help="category table TSV")
    if detections:
        p.add_argument("--detections", type=Path, help="detector boxes JSON")
    if corpus:
        p.add_argument("--scenes", type=Path, help="corpus root; each subdirectory with a semantic.png is one scene")
        p.add_argument("--jobs", type=int, default=1, help="scenes processed in parallel")
    p.add_argument("--trust-metadata", action="store_true", help="take area/bbox from metadata.csv instead of recomputing")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="foodfuse", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"foodfuse {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="fuse mask proposals with the coarse map")
    _add_input_args(p, corpus=True, detections=False)
    _add_fusion_args(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("instance", help="build an instance map from food masks")
    _add_input_args(p, corpus=True, detections=False)
    _add_fusion_args(p)
    _add_assembly_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_instance)

    p = sub.add_parser("panoptic", help="instances plus detector-labeled non-food things")
    _add_input_args(p, corpus=True, detections=True)
    _add_fusion_args(p)
    _add_assembly_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_panoptic)

    p = sub.add_parser("prompt", help="select segments with a point, box, mask, or regular prompt")
    _add_input_args(p, corpus=False, detections=True)
    _add_fusion_args(p)
    _add_assembly_args(p)
    p.add_argument("--mode", choices=("point", "box", "mask", "regular"), required=True)
    p.add_argument("--point", help="x,y")
    p.add_argument("--box", help="x0,y0,x1,y1")
    p.add_argument("--mask-png", type=Path, help="binary PNG, nonzero pixels form the mask prompt")
    p.add_argument("--samples", type=int, default=32, help="points sampled from a mask prompt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="also write the JSON result here")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("eval", help="confusion-matrix metrics against ground truth")
    p.add_argument("--pred", type=Path, required=True, help="predicted label map PNG, or a directory of them")
    p.add_argument("--gt", type=Path, required=True, help="ground truth PNG or directory; names must match --pred")
    p.add_argument("--categories", type=Path, required=True)
    p.add_argument("--ignore", type=int, action="append", default=[], help="gt label to exclude (repeatable)")
    p.add_argument("--strict-n", action="store_true", help="divide means by the full class count, absent classes included")
    p.add_argument("--json", type=Path, help="also write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="re-run enhancement over a parameter grid and score each value")
    p.add_argument("--scenes", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True, help="directory of ground truth PNGs named {scene}.png")
    p.add_argument("--categories", type=Path)
    p.add_argument("--param", choices=("tau", "topk", "sort"), required=True)
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 0,0.3,0.5,0.7,0.9")
    p.add_argument("--ignore", type=int, action="append", default=[])
    p.add_argument("--strict-n", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trust-metadata", action="store_true")
    _add_fusion_args(p)
    p.add_argument("--out", type=Path, required=True, help="output directory for sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="HTTP API over a scene corpus")
    p.add_argument("--data-root", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--preload", action="store_true", help="compute all scenes at startup")
    p.set_defaults(func=cmd_serve)

    return parser


def _fusion_params(args: argparse.Namespace) -> FusionParams:
    return FusionParams(
        tau=args.tau,
        top_k=args.topk,
        sort_order=args.sort,
        skip_background_paint=args.skip_background_paint,
    )


def _assembly_params(args: argparse.Namespace) -> AssemblyParams:
    return AssemblyParams(
        min_area_ratio=args.min_area,
        merge_distance=args.merge_dist,
        panoptic_iou_thresh=args.iou_thresh,
        pixel_iou=args.pixel_iou,
    )


# ---------------------------------------------------------------------------
# corpus layout


@dataclass(frozen=True)
class SceneEntry:
    """Paths for one scene inside a corpus root."""

    scene_id: str
    semantic: Path
    sam_dir: Path
    detections: Path | None
    image: Path | None


def discover_scenes(root: Path, require_nonempty: bool = True) -> list[SceneEntry]:
    """Scene = subdirectory holding semantic.png and a sam/ directory."""
    if not root.is_dir():
        raise NotADirectoryError(f"scene root {root} is not a directory")
    entries = []
    for child in sorted(root.iterdir()):
        semantic = child / "semantic.png"
        if not (child.is_dir() and semantic.is_file()):
            continue
        det = child / "detections.json"
        img = child / "image.png"
        entries.append(
            SceneEntry(
                scene_id=child.name,
                semantic=semantic,
                sam_dir=child / "sam",
                detections=det if det.is_file() else None,
                image=img if img.is_file() else None,
            )
        )
    if not entries and require_nonempty:
        raise FileNotFoundError(f"no scenes under {root} (need <scene>/semantic.png)")
    return entries


def _corpus_categories(args: argparse.Namespace) -> Path:
    if args.categories is not None:
        return args.categories
    fallback = args.scenes / "categories.tsv"
    if not fallback.is_file():
        raise _UsageError("--categories is required when the corpus root has no categories.tsv")
    return fallback


def _load_entry(entry: SceneEntry, categories: CategoryTable, trust: bool, with_detections: bool) -> SceneBundle:
    return load_scene(
        semantic_path=entry.semantic,
        mask_dir=entry.sam_dir,
        categories=categories,
        detections_path=entry.detections if with_detections else None,
        image_path=entry.image,
        trust_metadata=trust,
    )


def _single_entry(args: argparse.Namespace, detections: bool) -> SceneEntry:
    missing = [
        flag
        for flag, val in (("--semantic", args.semantic), ("--sam-dir", args.sam_dir), ("--categories", args.categories))
        if val is None
    ]
    if missing:
        raise _UsageError(f"single-scene mode needs {', '.join(missing)} (or use --scenes)")
    det = getattr(args, "detections", None) if detections else None
    return SceneEntry(
        scene_id=args.semantic.stem,
        semantic=args.semantic,
        sam_dir=args.sam_dir,
        detections=det,
        image=None,
    )


# ---------------------------------------------------------------------------
# manifest


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_tree(path: Path) -> str:
    """Stable digest of a directory: sorted relative names and file digests."""
    h = hashlib.sha256()
    for file in sorted(p for p in path.rglob("*") if p.is_file()):
        h.update(file.relative_to(path).as_posix().encode())
        h.update(b"\0")
        h.update(_sha256_file(file).encode())
        h.update(b"\n")
    return h.hexdigest()


def _hash_input(path: Path) -> dict[str, str]:
    digest = _sha256_tree(path) if path.is_dir() else _sha256_file(path)
    return {"path": str(path), "sha256": digest}


def write_manifest(
    out_dir: Path,
    command: str,
    config: dict[str, Any],
    inputs: dict[str, Path],
    outputs: Sequence[str],
) -> Path:
    manifest = {
        "tool": "foodfuse",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {name: _hash_input(path) for name, path in sorted(inputs.items())},
        "outputs": sorted(outputs),
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _config_dict(args: argparse.Namespace, keys: Sequence[str]) -> dict[str, Any]:
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


FUSION_KEYS = ("tau", "topk", "sort", "skip_background_paint", "trust_metadata")
ASSEMBLY_KEYS = ("min_area", "merge_dist", "iou_thresh", "pixel_iou")


# ---------------------------------------------------------------------------
# stage runners


def _run_scenes(
    entries: Sequence[SceneEntry],
    jobs: int,
    work: Callable[[SceneEntry], None],
) -> None:
    """Apply work() to every scene, optionally in parallel, fail on first error."""
    if jobs <= 1 or len(entries) <= 1:
        for entry in entries:
            work(entry)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(work, entry) for entry in entries]
        for future in futures:
            future.result()


def _stage_command(args: argparse.Namespace, stage: str) -> int:
    """Shared body of enhance/instance/panoptic."""
    wants_detections = stage == "panoptic"
    fparams = _fusion_params(args)
    aparams = _assembly_params(args) if stage != "enhance" else None

    corpus = args.scenes is not None
    if corpus:
        categories_path = _corpus_categories(args)
        entries = discover_scenes(args.scenes)
        inputs: dict[str, Path] = {"scenes": args.scenes, "categories": categories_path}
    else:
        entry = _single_entry(args, detections=wants_detections)
        categories_path = args.categories
        entries = [entry]
        inputs = {"semantic": entry.semantic, "sam_dir": entry.sam_dir, "categories": categories_path}
        if entry.detections is not None:
            inputs["detections"] = entry.detections

    categories = load_categories(categories_path)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []

    def process(entry: SceneEntry) -> None:
        bundle = _load_entry(entry, categories, args.trust_metadata, wants_detections)
        log.info("%s: %s (%dx%d, %d masks)", stage, entry.scene_id, bundle.size[0], bundle.size[1], len(bundle.masks.records))
        if stage == "enhance":
            enhanced, votes = enhance(bundle, fparams)
            if corpus:
                map_path = out / "enhanced" / f"{entry.scene_id}.png"
                votes_path = out / "votes" / f"{entry.scene_id}.json"
            else:
                map_path = out / "enhanced.png"
                votes_path = out / "votes.json"
            map_path.parent.mkdir(parents=True, exist_ok=True)
            votes_path.parent.mkdir(parents=True, exist_ok=True)
            save_label_map(enhanced, map_path)
            votes_path.write_text(json.dumps(votes_payload(votes, fparams.tau), indent=2) + "\n")
            written = [map_path, votes_path]
        else:
            result = compute_scene(bundle, fparams, aparams)
            if stage == "instance":
                target_dir = (out / "instance") if corpus else out
                stem = entry.scene_id if corpus else "instance"
                written = save_instance_map(result.instances, target_dir, categories, stem=stem)
            else:
                target_dir = (out / "panoptic") if corpus else out
                stem = entry.scene_id if corpus else "panoptic"
                written = save_panoptic_map(result.panoptic, target_dir, categories, stem=stem)
        outputs.extend(str(p.relative_to(out)) for p in written)

    _run_scenes(entries, getattr(args, "jobs", 1), process)

    keys = FUSION_KEYS if stage == "enhance" else FUSION_KEYS + ASSEMBLY_KEYS
    write_manifest(out, stage, _config_dict(args, keys), inputs, outputs)
    print(f"{stage}: wrote {len(outputs)} file(s) to {out}")
    return 0


def cmd_enhance(args: argparse.Namespace) -> int:
    return _stage_command(args, "enhance")


def cmd_instance(args: argparse.Namespace) -> int:
    return _stage_command(args, "instance")


def cmd_panoptic(args: argparse.Namespace) -> int:
    return _stage_command(args, "panoptic")


# ---------------------------------------------------------------------------
# prompt


def _parse_floats(text: str, n: int, flag: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise _UsageError(f"{flag} expects {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise _UsageError(f"{flag}: {exc}") from exc


def _build_prompt(args: argparse.Namespace) -> Prompt:
    if args.mode == "point":
        if args.point is None:
            raise _UsageError("--mode point needs --point x,y")
        return Prompt(kind="point", point=_parse_floats(args.point, 2, "--point"))
    if args.mode == "box":
        if args.box is None:
            raise _UsageError("--mode box needs --box x0,y0,x1,y1")
        return Prompt(kind="box", box=_parse_floats(args.box, 4, "--box"))
    if args.mode == "mask":
        if args.mask_png is None:
            raise _UsageError("--mode mask needs --mask-png")
        raw = load_label_map(args.mask_png)
        return Prompt(kind="mask", mask=raw.data > 0)
    return Prompt(kind="regular")


def cmd_prompt(args: argparse.Namespace) -> int:
    entry = _single_entry(args, detections=True)
    categories = load_categories(args.categories)
    bundle = _load_entry(entry, categories, args.trust_metadata, with_detections=True)
    result_all = compute_scene(bundle, _fusion_params(args), _assembly_params(args))
    prompt = _build_prompt(args)
    result = promptable_segment(
        result_all.panoptic,
        bundle.detections,
        prompt,
        n_samples=args.samples,
        seed=args.seed,
    )
    payload = result_to_json(result, categories, bundle.detections)
    text = json.dumps(payload, indent=2) + "\n"
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args: argparse.Namespace) -> int:
    categories = load_categories(args.categories)
    ignore = tuple(args.ignore)
    if args.pred.is_dir() != args.gt.is_dir():
        raise _UsageError("--pred and --gt must both be files or both be directories")
    if args.pred.is_dir():
        report = evaluate_dir(args.pred, args.gt, categories, ignore_ids=ignore, strict_n=args.strict_n)
    else:
        pred = load_label_map(args.pred)
        gt = load_label_map(args.gt)
        cm = confusion_matrix(pred, gt, categories.semantic_class_count, ignore_ids=ignore)
        report = report_from_matrix(cm, strict_n=args.strict_n)
    print(report.format_table(categories))
    if args.json is not None:
        args.json.parent.mkdir(parents=True, exist_ok=True)
        args.json.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return 0


# ---------------------------------------------------------------------------
# sweep


def _parse_sweep_values(param: str, raw: str) -> list[Any]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise _UsageError("--values is empty")
    if param == "tau":
        return [float(p) for p in parts]
    if param == "topk":
        values: list[Any] = []
        for p in parts:
            if p.lower() in ("none", "all"):
                values.append(None)
            else:
                values.append(int(p))
        return values
    for p in parts:
        if p not in SORT_ORDERS:
            raise _UsageError(f"unknown sort order {p!r}; choices are {', '.join(SORT_ORDERS)}")
    return parts


@dataclass
class _SweepScene:
    """One scene preloaded for the sweep: bundle, ground truth, vote cache."""

    scene_id: str
    bundle: SceneBundle
    gt: LabelMap


def cmd_sweep(args: argparse.Namespace) -> int:
    values = _parse_sweep_values(args.param, args.values)
    categories_path = _corpus_categories(args)
    categories = load_categories(categories_path)
    entries = discover_scenes(args.scenes)
    base = _fusion_params(args)
    ignore = tuple(args.ignore)
    n_classes = categories.semantic_class_count

    scenes: list[_SweepScene] = [None] * len(entries)  # type: ignore[list-item]

    def load_one(index: int, entry: SceneEntry) -> None:
        gt_path = args.gt / f"{entry.scene_id}.png"
        if not gt_path.is_file():
            raise MissingPairError(f"no ground truth {gt_path} for scene {entry.scene_id}")
        bundle = _load_entry(entry, categories, args.trust_metadata, with_detections=False)
        scenes[index] = _SweepScene(entry.scene_id, bundle, load_label_map(gt_path))

    if args.jobs > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(load_one, i, e) for i, e in enumerate(entries)]
            for future in futures:
                future.result()
    else:
        for i, e in enumerate(entries):
            load_one(i, e)

    # Votes depend only on the mask and the coarse map, never on the swept
    # parameter, so compute each scene's full ledger once.
    vote_cache = {
        scene.scene_id: {r.mask_id: vote_mask_label(r, scene.bundle.semantic) for r in scene.bundle.masks.records}
        for scene in scenes
    }

    def params_for(value: Any) -> FusionParams:
        if args.param == "tau":
            return replace(base, tau=value)
        if args.param == "topk":
            return replace(base, top_k=value)
        return replace(base, sort_order=value)

    rows: list[tuple[str, Any, Any, Any]] = []
    for raw_value, value in zip([p.strip() for p in args.values.split(",") if p.strip()], values):
        params = params_for(value)
        total = None
        for scene in scenes:
            selected = top_k_by_area(scene.bundle.masks.records, params.top_k)
            votes = [vote_cache[scene.scene_id][r.mask_id] for r in selected]
            enhanced = enhance_from_votes(
                scene.bundle.semantic, selected, votes, params, categories.background_id
            )
            cm = confusion_matrix(enhanced, scene.gt, n_classes, ignore_ids=ignore)
            total = cm if total is None else total + cm
        report = report_from_matrix(total, strict_n=args.strict_n)
        rows.append((raw_value, report.miou, report.macc, report.aacc))
        log.info("sweep %s=%s: miou=%r macc=%r aacc=%r", args.param, raw_value, report.miou, report.macc, report.aacc)

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "miou", "macc", "aacc"])
        for raw_value, m_iou, m_acc, a_acc in rows:
            writer.writerow([raw_value, repr(m_iou), repr(m_acc), repr(a_acc)])
    config = _config_dict(args, ("param", "values", "strict_n", "ignore") + FUSION_KEYS)
    write_manifest(out, "sweep", config, {"scenes": args.scenes, "gt": args.gt, "categories": categories_path}, ["sweep.csv"])
    print(f"sweep: wrote {csv_path} ({len(rows)} row(s))")
    return 0


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(args.data_root, preload=args.preload)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# entry points


def _configure_logging(verbose: int) -> None:
    env = os.environ.get(ENV_LOG, "").upper()
    level = logging.WARNING
    if env in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = getattr(logging, env)
    if verbose == 1:
        level = min(level, logging.INFO)
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and --version land here
        return 0 if exc.code in (0, None) else 1
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FoodFuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
