"""Pipeline configuration, dataset adapters, stage caching, and orchestration.

A run walks ingest -> align -> fit-mask -> extract -> spot -> evaluate for
every clip in the input tree.  Stage outputs are cached keyed by a content
hash of the stage inputs plus the relevant configuration, so reruns on
unchanged inputs skip straight to the report; outputs are written atomically
(temp + rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import evaluation, spotting, synth
from .features.cube import FeatureCube, PlaneSelection, load_cube, save_cube
from .features.denoise import DenoiseConfig
from .features.extract import ConfigError, ExtractConfig, extract
from .geometry.regions import (
    FileLandmarkProvider,
    RegionAtlas,
    default_atlas,
    fit_region_mask,
    load_atlas,
)
from .geometry.register import align_sequence
from .ingest import (
    FrameSequence,
    LoadError,
    load_ground_truth,
    load_manifest,
    load_sequence,
)
from .spotting import SpotParams, SpottingResult, micro_interval

CACHE_ENV = "MICROSPOT_CACHE"

ADAPTERS = ("synth", "samm-layout", "casme2-layout")

ROC_RS = tuple(range(2, 27, 2))

_CONFIG_SCHEMA = {
    "N": 71,
    "R": 12,
    "B": 8,
    "descriptor": "hog3d",
    "planes": "XT",
    "a": 0.01,
    "denoise": {"method": "none", "sigma": 1.0},
    "peak": {"smooth_width": None, "slope_threshold": 0.0, "min_separation": None},
    "micro_max_ms": 500.0,
    "registration": {"enabled": True, "k": 100},
    "atlas": None,
    "adapter": "synth",
    "lbp_radii": [1, 1, 1],
    "hoof": {"alpha": 15.0, "iterations": 100},
}


@dataclass(frozen=True)
class PipelineConfig:
    """Validated bundle of every stage's parameters."""

    N: int = 71
    R: int = 12
    B: int = 8
    descriptor: str = "hog3d"
    planes: str = "XT"
    a: float = 0.01
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    peak_smooth_width: int | None = None
    peak_slope_threshold: float = 0.0
    peak_min_separation: int | None = None
    micro_max_ms: float = 500.0
    registration_enabled: bool = True
    registration_k: int = 100
    atlas_path: str | None = None
    adapter: str = "synth"
    lbp_radii: tuple[int, int, int] = (1, 1, 1)
    hoof_alpha: float = 15.0
    hoof_iterations: int = 100

    def __post_init__(self):
        micro_interval(self.N)  # validates odd and >= 3
        if not 1 <= self.R <= 26:
            raise ConfigError(f"R must be in [1, 26], got {self.R}")
        if not 0.0 < self.a <= 1.0:
            raise ConfigError(f"a must be in (0, 1], got {self.a}")
        if self.adapter not in ADAPTERS:
            raise ConfigError(f"unknown adapter {self.adapter!r}; choose from {ADAPTERS}")
        PlaneSelection(self.planes)  # raises on unknown plane selection
        if self.registration_k < 1:
            raise ConfigError("registration k must be >= 1")

    def extract_config(self) -> ExtractConfig:
        return ExtractConfig(
            descriptor=self.descriptor,
            planes=PlaneSelection(self.planes),
            bins=self.B,
            denoise=self.denoise,
            lbp_radii=tuple(self.lbp_radii),
            hoof_alpha=self.hoof_alpha,
            hoof_iterations=self.hoof_iterations,
        )

    def spot_params(self, top_r: int | None = None) -> SpotParams:
        mi = micro_interval(self.N)
        peak = spotting.PeakParams(
            smooth_width=self.peak_smooth_width or max(mi.k // 2, 1),
            slope_threshold=self.peak_slope_threshold,
            min_separation=(
                self.peak_min_separation if self.peak_min_separation is not None else mi.k
            ),
        )
        return SpotParams(
            mi=mi,
            top_r=top_r if top_r is not None else self.R,
            height_fraction=self.a,
            peak=peak,
            micro_max_ms=self.micro_max_ms,
        )

    def atlas(self) -> RegionAtlas:
        return load_atlas(self.atlas_path) if self.atlas_path else default_atlas()

    def feature_key(self) -> dict:
        """Config subset that determines feature-stage output."""
        return {
            "descriptor": self.descriptor,
            "planes": self.planes,
            "B": self.B,
            "denoise": [self.denoise.method, self.denoise.sigma],
            "registration": [self.registration_enabled, self.registration_k],
            "lbp_radii": list(self.lbp_radii),
            "hoof": [self.hoof_alpha, self.hoof_iterations],
            "atlas": self.atlas_path or "bundled",
        }

    def spot_key(self) -> dict:
        """Config subset that determines spotting-stage output."""
        return {
            "N": self.N,
            "a": self.a,
            "peak": [
                self.peak_smooth_width,
                self.peak_slope_threshold,
                self.peak_min_separation,
            ],
            "micro_max_ms": self.micro_max_ms,
        }


def _check_unknown_keys(raw: dict, schema: dict, path: str = "") -> None:
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(value, dict) and isinstance(schema[key], dict):
            _check_unknown_keys(value, schema[key], path + key + ".")


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read and validate the JSON pipeline config; None gives the defaults."""
    if path is None:
        return PipelineConfig()
    raw = json.loads(Path(path).read_text())
    _check_unknown_keys(raw, _CONFIG_SCHEMA)
    den = raw.get("denoise", {})
    peak = raw.get("peak", {})
    reg = raw.get("registration", {})
    hoofp = raw.get("hoof", {})
    return PipelineConfig(
        N=int(raw.get("N", 71)),
        R=int(raw.get("R", 12)),
        B=int(raw.get("B", 8)),
        descriptor=raw.get("descriptor", "hog3d"),
        planes=raw.get("planes", "XT"),
        a=float(raw.get("a", 0.01)),
        denoise=DenoiseConfig(
            method=den.get("method", "none"), sigma=float(den.get("sigma", 1.0))
        ),
        peak_smooth_width=peak.get("smooth_width"),
        peak_slope_threshold=float(peak.get("slope_threshold", 0.0)),
        peak_min_separation=peak.get("min_separation"),
        micro_max_ms=float(raw.get("micro_max_ms", 500.0)),
        registration_enabled=bool(reg.get("enabled", True)),
        registration_k=int(reg.get("k", 100)),
        atlas_path=raw.get("atlas"),
        adapter=raw.get("adapter", "synth"),
        lbp_radii=tuple(raw.get("lbp_radii", (1, 1, 1))),
        hoof_alpha=float(hoofp.get("alpha", 15.0)),
        hoof_iterations=int(hoofp.get("iterations", 100)),
    )


# ---------------------------------------------------------------------------
# dataset adapters: map an on-disk layout to clips + baselines + ground truth

@dataclass(frozen=True)
class ClipEntry:
    clip_id: str
    subject_id: str
    clip_dir: Path
    frames_dir: Path
    manifest: dict
    baseline_dir: Path | None  # frames directory of the subject's baseline


def _synth_layout(root: Path) -> list[ClipEntry]:
    clips = []
    clips_dir = root / "clips"
    if not clips_dir.is_dir():
        raise LoadError(f"{root}: no clips/ directory (synth layout)")
    for clip_dir in sorted(clips_dir.iterdir()):
        if not clip_dir.is_dir():
            continue
        manifest = load_manifest(clip_dir / "manifest.json")
        baseline = root / "baselines" / str(manifest["subject_id"])
        clips.append(
            ClipEntry(
                clip_id=str(manifest["clip_id"]),
                subject_id=str(manifest["subject_id"]),
                clip_dir=clip_dir,
                frames_dir=clip_dir / "frames",
                manifest=manifest,
                baseline_dir=baseline if baseline.is_dir() else None,
            )
        )
    return clips


def _flat_layout(root: Path, fps: float, neutral_pad: int, with_baselines: bool) -> list[ClipEntry]:
    """<root>/<subject>/<clip>/*.jpg with optional <root>/baselines/<subject>/."""
    clips = []
    for subject_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if subject_dir.name == "baselines":
            continue
        for clip_dir in sorted(p for p in subject_dir.iterdir() if p.is_dir()):
            manifest = {
                "fps": fps,
                "subject_id": subject_dir.name,
                "clip_id": f"{subject_dir.name}_{clip_dir.name}",
                "neutral_pad": neutral_pad,
            }
            baseline = root / "baselines" / subject_dir.name
            clips.append(
                ClipEntry(
                    clip_id=manifest["clip_id"],
                    subject_id=subject_dir.name,
                    clip_dir=clip_dir,
                    frames_dir=clip_dir,
                    manifest=manifest,
                    baseline_dir=baseline if with_baselines and baseline.is_dir() else None,
                )
            )
    return clips


def discover_clips(input_dir: str | Path, adapter: str) -> list[ClipEntry]:
    root = Path(input_dir)
    if not root.is_dir():
        raise LoadError(f"input directory not found: {root}")
    if adapter == "synth":
        return _synth_layout(root)
    if adapter == "samm-layout":
        return _flat_layout(root, fps=200.0, neutral_pad=200, with_baselines=True)
    if adapter == "casme2-layout":
        # no dedicated baselines: excess neutral frames stand in (see spot stage)
        return _flat_layout(root, fps=200.0, neutral_pad=50, with_baselines=False)
    raise ConfigError(f"unknown adapter {adapter!r}")


def baseline_from_padding(seq: FrameSequence) -> FrameSequence:
    """Concatenate the leading and trailing neutral pads as a baseline."""
    pad = seq.neutral_pad
    if pad <= 0:
        raise LoadError(
            f"clip {seq.clip_id}: no baseline sequence and no neutral padding"
        )
    frames = np.concatenate([seq.frames[:pad], seq.frames[-pad:]], axis=0)
    return FrameSequence(
        frames=frames,
        fps=seq.fps,
        subject_id=seq.subject_id,
        clip_id=f"{seq.clip_id}_padbaseline",
        neutral_pad=0,
    )


# ---------------------------------------------------------------------------
# content-hash stage caching

def _hash_bytes(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.hexdigest()


def _hash_tree(directory: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(directory.rglob("*")):
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def _hash_config(key: dict) -> str:
    return _hash_bytes(json.dumps(key, sort_keys=True).encode())


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        writer(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class StageCache:
    """Per-stage artifact cache keyed by config and upstream content hashes."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _meta_path(self, stage: str, name: str) -> Path:
        return self.root / stage / f"{name}.meta.json"

    def artifact_path(self, stage: str, name: str, suffix: str) -> Path:
        return self.root / stage / f"{name}{suffix}"

    def is_fresh(self, stage: str, name: str, suffix: str, key: dict) -> bool:
        meta_path = self._meta_path(stage, name)
        artifact = self.artifact_path(stage, name, suffix)
        if not meta_path.is_file() or not artifact.is_file():
            return False
        try:
            meta = json.loads(meta_path.read_text())
        except (OSError, json.JSONDecodeError):
            return False
        return meta.get("key") == key

    def commit(self, stage: str, name: str, suffix: str, key: dict, writer) -> Path:
        artifact = self.artifact_path(stage, name, suffix)
        _atomic_write(artifact, writer)
        _atomic_write(
            self._meta_path(stage, name),
            lambda p: p.write_text(json.dumps({"stage": stage, "key": key}, sort_keys=True)),
        )
        return artifact


def cache_root(output_dir: Path) -> Path:
    env = os.environ.get(CACHE_ENV, "").strip()
    return Path(env) if env else output_dir / "cache"


# ---------------------------------------------------------------------------
# stages

def load_clip_sequence(entry: ClipEntry) -> FrameSequence:
    return load_sequence(entry.frames_dir, entry.manifest)


def clip_feature_cube(
    entry: ClipEntry,
    config: PipelineConfig,
    cache: StageCache,
    atlas: RegionAtlas,
    stage: str = "features",
) -> tuple[Path, bool]:
    """Compute (or reuse) the feature cube for one clip; returns (path, fresh)."""
    key = {
        "config": config.feature_key(),
        "input": _hash_tree(entry.clip_dir),
        "atlas_version": atlas.version,
    }
    if cache.is_fresh(stage, entry.clip_id, ".fcube", key):
        return cache.artifact_path(stage, entry.clip_id, ".fcube"), False

    seq = load_clip_sequence(entry)
    if config.registration_enabled:
        seq = align_sequence(seq, k=config.registration_k)
    landmarks = FileLandmarkProvider().landmarks_for(entry.clip_dir)
    mask = fit_region_mask(atlas, landmarks, (seq.width, seq.height))
    cube = extract(seq, mask, config.extract_config())
    path = cache.commit(
        stage, entry.clip_id, ".fcube", key, lambda p: save_cube(cube, p)
    )
    return path, True


def subject_baseline_cube(
    entry: ClipEntry,
    config: PipelineConfig,
    cache: StageCache,
    atlas: RegionAtlas,
    movement: FeatureCube | None = None,
) -> FeatureCube:
    """Feature cube of the subject's baseline sequence.

    Uses the dedicated baseline recording when the dataset provides one;
    otherwise concatenates the clip's own neutral padding.
    """
    if entry.baseline_dir is not None:
        key = {
            "config": config.feature_key(),
            "input": _hash_tree(entry.baseline_dir),
            "atlas_version": atlas.version,
        }
        name = f"baseline_{entry.subject_id}"
        if not cache.is_fresh("features", name, ".fcube", key):
            manifest = load_manifest(entry.baseline_dir / "manifest.json")
            seq = load_sequence(entry.baseline_dir / "frames", manifest)
            if config.registration_enabled:
                seq = align_sequence(seq, k=config.registration_k)
            landmarks = FileLandmarkProvider().landmarks_for(entry.baseline_dir)
            mask = fit_region_mask(atlas, landmarks, (seq.width, seq.height))
            cube = extract(seq, mask, config.extract_config())
            cache.commit("features", name, ".fcube", key, lambda p: save_cube(cube, p))
        return load_cube(cache.artifact_path("features", name, ".fcube"))

    # CASME II style: build the baseline from the clip's excess neutral frames
    seq = load_clip_sequence(entry)
    base = baseline_from_padding(seq)
    if config.registration_enabled:
        base = align_sequence(base, k=config.registration_k)
    landmarks = FileLandmarkProvider().landmarks_for(entry.clip_dir)
    mask = fit_region_mask(atlas, landmarks, (base.width, base.height))
    return extract(base, mask, config.extract_config())


def spot_clip(
    entry: ClipEntry,
    config: PipelineConfig,
    cache: StageCache,
    atlas: RegionAtlas,
) -> tuple[SpottingResult, bool]:
    """Spot one clip with all regions emitted (top-R filtering happens later).

    The per-region signals, thresholds, and peaks do not depend on R, so one
    full-spotting pass supports every R in the ROC sweep.
    """
    feat_path, _ = clip_feature_cube(entry, config, cache, atlas)
    key = {
        "config": config.spot_key(),
        "features": _hash_bytes(feat_path.read_bytes()),
    }
    if cache.is_fresh("spotting", entry.clip_id, ".json", key):
        return (
            spotting.load_result(cache.artifact_path("spotting", entry.clip_id, ".json")),
            False,
        )
    movement = load_cube(feat_path)
    baseline = subject_baseline_cube(entry, config, cache, atlas, movement)
    result = spotting.spot(
        movement,
        baseline,
        config.spot_params(top_r=26),
        fps=float(entry.manifest["fps"]),
        clip_id=entry.clip_id,
        subject_id=entry.subject_id,
    )
    cache.commit(
        "spotting", entry.clip_id, ".json", key, lambda p: spotting.save_result(result, p)
    )
    return result, True


def filter_result(result: SpottingResult, top_r: int) -> SpottingResult:
    """Restrict a full spotting result to the top-R ranked regions."""
    emit = set(result.region_ranking[:top_r])
    return SpottingResult(
        clip_id=result.clip_id,
        subject_id=result.subject_id,
        fps=result.fps,
        peaks=tuple(p for p in result.peaks if p.region_id in emit),
        abt=result.abt,
        region_ranking=result.region_ranking,
    )


def _spot_entry_job(args):
    entry, config, cache_dir, atlas_path = args
    atlas = load_atlas(atlas_path) if atlas_path else default_atlas()
    cache = StageCache(cache_dir)
    result, _ = spot_clip(entry, config, cache, atlas)
    return entry.clip_id


def run_pipeline(
    config: PipelineConfig,
    input_dir: str | Path,
    output_dir: str | Path,
    jobs: int = 1,
) -> dict:
    """Full run: per-clip spotting, evaluation at the configured R, ROC sweep.

    Returns a summary dict; artifacts land under ``output_dir`` (spotting
    results, report tables, ROC CSV) with the cache under
    ``output_dir/cache`` unless MICROSPOT_CACHE points elsewhere.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    cache = StageCache(cache_root(output_dir))
    atlas = config.atlas()

    clips = discover_clips(input_dir, config.adapter)
    if not clips:
        raise LoadError(f"no clips found in {input_dir}")

    gt_path = Path(input_dir) / "ground_truth.csv"
    if not gt_path.is_file():
        raise LoadError(f"ground truth file not found: {gt_path}")
    movements = load_ground_truth(gt_path)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(
                pool.map(
                    _spot_entry_job,
                    [(e, config, cache.root, config.atlas_path) for e in clips],
                )
            )

    results: dict[str, SpottingResult] = {}
    for entry in sorted(clips, key=lambda e: e.clip_id):
        result, _ = spot_clip(entry, config, cache, atlas)
        results[entry.clip_id] = result

    spot_dir = output_dir / "spotting"
    spot_dir.mkdir(parents=True, exist_ok=True)
    for clip_id, result in results.items():
        spotting.save_result(
            filter_result(result, config.R), spot_dir / f"{clip_id}.json"
        )

    truths = {
        e.clip_id: evaluation.region_ground_truth(e.clip_id, movements, atlas)
        for e in clips
    }

    def counts_for_r(r: int) -> evaluation.ConfusionCounts:
        total = evaluation.ConfusionCounts()
        for clip_id in sorted(results):
            total = total + evaluation.spot_check(
                filter_result(results[clip_id], r), truths[clip_id]
            )
        return total

    counts = counts_for_r(config.R)
    m = evaluation.metrics(counts)
    roc = evaluation.roc_sweep(counts_for_r, ROC_RS)

    label = f"{config.descriptor}-{config.planes}"
    evaluation.report(
        output_dir / "report",
        [{"label": label, "counts": counts, "metrics": m, "roc": roc}],
        config_summary={
            "N": config.N,
            "R": config.R,
            "B": config.B,
            "descriptor": config.descriptor,
            "planes": config.planes,
            "a": config.a,
            "adapter": config.adapter,
            "clips": len(clips),
        },
    )
    return {"label": label, "counts": counts, "metrics": m, "roc": roc, "clips": len(clips)}


def run_sweep(
    config: PipelineConfig,
    input_dir: str | Path,
    output_dir: str | Path,
    descriptors: list[str],
    planes: list[str],
    jobs: int = 1,
) -> list[dict]:
    """Cartesian sweep over descriptors and planes; one report per cell.

    Failed cells are recorded and the sweep continues.  HOOF ignores plane
    selection, so it contributes a single cell.
    """
    if not descriptors or not planes:
        raise ConfigError("sweep grid must name at least one descriptor and one plane")
    output_dir = Path(output_dir)
    cells = []
    seen = set()
    for d in descriptors:
        for p in planes if d != "hoof" else ["ALL"]:
            if (d, p) in seen:
                continue
            seen.add((d, p))
            cells.append((d, p))

    sections = []
    for d, p in cells:
        cell_config = replace(config, descriptor=d, planes=p)
        cell_dir = output_dir / f"{d}-{p}"
        try:
            summary = run_pipeline(cell_config, input_dir, cell_dir, jobs=jobs)
            summary["error"] = None
        except Exception as exc:  # sweep must outlive failing cells
            summary = {
                "label": f"{d}-{p}",
                "counts": evaluation.ConfusionCounts(),
                "metrics": evaluation.metrics(evaluation.ConfusionCounts()),
                "roc": None,
                "error": f"{type(exc).__name__}: {exc}",
            }
        sections.append(summary)

    evaluation.report(
        output_dir / "report",
        [
            {
                "label": s["label"] + (" [FAILED]" if s.get("error") else ""),
                "counts": s["counts"],
                "metrics": s["metrics"],
                "roc": s["roc"],
            }
            for s in sections
        ],
        config_summary={"N": config.N, "R": config.R, "grid": len(sections)},
    )
    return sections
