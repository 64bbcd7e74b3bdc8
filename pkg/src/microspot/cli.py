"""Command-line entry point: run, sweep, synth, and the standalone stages.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, pipeline, spotting, synth
from .features.cube import load_cube, save_cube
from .features.extract import ConfigError, extract
from .geometry.regions import (
    AtlasError,
    FileLandmarkProvider,
    MaskFitError,
    fit_region_mask,
)
from .geometry.register import align_sequence
from .ingest import LoadError, ValidationError, load_ground_truth, load_manifest, load_sequence
from .spotting import SpottingConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

_CONFIG_ERRORS = (ConfigError, SpottingConfigError, AtlasError)
_DATA_ERRORS = (LoadError, ValidationError, MaskFitError, FileNotFoundError)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microspot",
        description="Spot subtle facial micro-movements in high-frame-rate sequences",
    )
    parser.add_argument("--config", type=Path, default=None, help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=0, help="seed for generation commands")
    parser.add_argument("--jobs", type=int, default=1, help="clip-level worker processes")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline: ingest through evaluation report")
    run.add_argument("input_dir", type=Path)
    run.add_argument("output_dir", type=Path)

    sweep = sub.add_parser("sweep", help="descriptor/plane grid, one report per cell")
    sweep.add_argument("input_dir", type=Path)
    sweep.add_argument("output_dir", type=Path)
    sweep.add_argument("--descriptors", nargs="+", default=["hog3d", "lbptop", "hoof"])
    sweep.add_argument("--planes", nargs="+", default=["XY", "XT", "YT", "XTYT", "ALL"])

    synth_cmd = sub.add_parser("synth", help="generate a synthetic dataset on disk")
    synth_cmd.add_argument("spec", type=Path, help="synth spec JSON")
    synth_cmd.add_argument("output_dir", type=Path)

    align = sub.add_parser("align", help="register a clip's frames to its first frame")
    align.add_argument("clip_dir", type=Path)
    align.add_argument("output_dir", type=Path)

    fit = sub.add_parser("fit-mask", help="fit the region atlas to a clip's landmarks")
    fit.add_argument("clip_dir", type=Path)
    fit.add_argument("output", type=Path, help="output .npz with labels and areas")

    ext = sub.add_parser("extract", help="extract the configured feature cube for a clip")
    ext.add_argument("clip_dir", type=Path)
    ext.add_argument("output", type=Path, help="output .fcube path")

    spot = sub.add_parser("spot", help="spot one clip from saved feature cubes")
    spot.add_argument("movement_cube", type=Path)
    spot.add_argument("baseline_cube", type=Path)
    spot.add_argument("output", type=Path)
    spot.add_argument("--fps", type=float, default=200.0)
    spot.add_argument("--clip-id", default="clip")

    ev = sub.add_parser("evaluate", help="score saved spotting results against ground truth")
    ev.add_argument("spotting_dir", type=Path)
    ev.add_argument("ground_truth", type=Path)
    ev.add_argument("output_dir", type=Path)

    return parser


def _load_clip(clip_dir: Path):
    manifest = load_manifest(clip_dir / "manifest.json")
    frames_dir = clip_dir / "frames"
    if not frames_dir.is_dir():
        frames_dir = clip_dir
    return load_sequence(frames_dir, manifest)


def _cmd_run(args, config) -> int:
    summary = pipeline.run_pipeline(config, args.input_dir, args.output_dir, jobs=args.jobs)
    m = summary["metrics"]

    def show(v):
        return "undef" if v is None else f"{v:.4f}"

    print(f"clips: {summary['clips']}  label: {summary['label']}")
    print(
        f"recall={show(m['recall'])} precision={show(m['precision'])} "
        f"f_measure={show(m['f_measure'])} auc={summary['roc'].auc:.4f}"
    )
    print(f"report: {Path(args.output_dir) / 'report' / 'report.txt'}")
    return EXIT_OK


def _cmd_sweep(args, config) -> int:
    sections = pipeline.run_sweep(
        config, args.input_dir, args.output_dir,
        descriptors=args.descriptors, planes=args.planes, jobs=args.jobs,
    )
    failed = [s["label"] for s in sections if s.get("error")]
    print(f"cells: {len(sections)}  failed: {len(failed)}")
    for s in sections:
        if s.get("error"):
            print(f"  {s['label']}: {s['error']}")
    print(f"merged report: {Path(args.output_dir) / 'report' / 'report.txt'}")
    return EXIT_OK


def _cmd_synth(args, config) -> int:
    specs = synth.load_spec_file(args.spec)
    outputs = [synth.generate(spec, seed + args.seed) for spec, seed in specs]
    root = synth.write_dataset(outputs, args.output_dir)
    print(f"wrote {len(outputs)} clips to {root}")
    return EXIT_OK


def _cmd_align(args, config) -> int:
    seq = _load_clip(args.clip_dir)
    aligned = align_sequence(seq, k=config.registration_k)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    from PIL import Image

    for i, frame in enumerate(aligned.frames):
        Image.fromarray(np.round(frame * 255).astype(np.uint8), mode="L").save(
            out / f"{i:06d}.png"
        )
    print(f"aligned {aligned.n_frames} frames into {out}")
    return EXIT_OK


def _cmd_fit_mask(args, config) -> int:
    seq = _load_clip(args.clip_dir)
    landmarks = FileLandmarkProvider().landmarks_for(args.clip_dir)
    mask = fit_region_mask(config.atlas(), landmarks, (seq.width, seq.height))
    np.savez_compressed(args.output, labels=mask.labels, areas=mask.areas)
    print(f"mask with {mask.n_regions} regions written to {args.output}")
    return EXIT_OK


def _cmd_extract(args, config) -> int:
    seq = _load_clip(args.clip_dir)
    if config.registration_enabled:
        seq = align_sequence(seq, k=config.registration_k)
    landmarks = FileLandmarkProvider().landmarks_for(args.clip_dir)
    mask = fit_region_mask(config.atlas(), landmarks, (seq.width, seq.height))
    cube = extract(seq, mask, config.extract_config())
    save_cube(cube, args.output)
    print(
        f"{cube.descriptor} cube: {cube.n_regions} regions x {cube.n_frames} frames "
        f"x {cube.data.shape[2]} bins -> {args.output}"
    )
    return EXIT_OK


def _cmd_spot(args, config) -> int:
    movement = load_cube(args.movement_cube)
    baseline = load_cube(args.baseline_cube)
    result = spotting.spot(
        movement, baseline, config.spot_params(), fps=args.fps, clip_id=args.clip_id
    )
    result = pipeline.filter_result(result, config.R)
    spotting.save_result(result, args.output)
    print(f"{len(result.peaks)} peaks -> {args.output}")
    return EXIT_OK


def _cmd_evaluate(args, config) -> int:
    movements = load_ground_truth(args.ground_truth)
    atlas = config.atlas()
    results = []
    for path in sorted(Path(args.spotting_dir).glob("*.json")):
        results.append(spotting.load_result(path))
    if not results:
        raise LoadError(f"no spotting results in {args.spotting_dir}")
    total = evaluation.ConfusionCounts()
    for result in results:
        gt = evaluation.region_ground_truth(result.clip_id, movements, atlas)
        total = total + evaluation.spot_check(result, gt)
    m = evaluation.metrics(total)
    evaluation.report(
        args.output_dir,
        [{"label": "saved-results", "counts": total, "metrics": m, "roc": None}],
    )
    print(json.dumps({k: v for k, v in m.items()}, indent=1))
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "synth": _cmd_synth,
    "align": _cmd_align,
    "fit-mask": _cmd_fit_mask,
    "extract": _cmd_extract,
    "spot": _cmd_spot,
    "evaluate": _cmd_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = pipeline.load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"internal error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
