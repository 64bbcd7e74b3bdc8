"""Synthetic sequences with known ground truth.

Generates textured faces (band-limited noise, since the descriptors need
gradient-rich content and region polygons define the semantics), injects
subtle localised intensity events with a Gaussian temporal profile, optional
subpixel camera drift, and additive noise, together with the matching
baseline sequence, landmarks, and ground-truth records.  Serves as the
desk-scale oracle for every downstream stage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .geometry.regions import RegionAtlas, default_atlas, rasterize_polygon
from .geometry.register import fourier_shift
from .ingest import (
    FrameSequence,
    GroundTruthMovement,
    LandmarkSet,
    save_ground_truth,
    save_landmarks,
    save_manifest,
)

CANONICAL_SIZE = 256.0


@dataclass(frozen=True)
class SynthEvent:
    """One injected movement: where, when, and how strong."""

    region_id: int
    onset: int
    apex: int
    offset: int
    amplitude: float

    def __post_init__(self):
        if not (self.onset < self.apex < self.offset):
            raise ValueError(
                f"require onset < apex < offset, got "
                f"({self.onset}, {self.apex}, {self.offset})"
            )
        if not 0.0 < self.amplitude <= 0.2:
            raise ValueError(
                f"amplitude must be in (0, 0.2] to stay subtle, got {self.amplitude}"
            )


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic clip plus its baseline."""

    width: int = 128
    height: int = 128
    fps: float = 200.0
    n_frames: int = 400
    events: tuple[SynthEvent, ...] = ()
    drift_per_frame: tuple[float, float] = (0.0, 0.0)
    noise_sigma: float = 0.0
    neutral_pad: int = 170
    texture_smoothing: float = 2.0
    subject_id: str = "synth"
    clip_id: str = "clip"

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for e in self.events:
            if e.offset >= self.n_frames:
                raise ValueError(
                    f"event in region {e.region_id} ends at {e.offset}, "
                    f"clip has {self.n_frames} frames"
                )


@dataclass(frozen=True)
class SynthOutput:
    """Movement clip, its baseline, landmarks, and the exact ground truth."""

    sequence: FrameSequence
    baseline: FrameSequence
    landmarks: LandmarkSet
    ground_truth: tuple[GroundTruthMovement, ...]
    event_masks: dict[int, np.ndarray] = field(repr=False, default_factory=dict)


def _texture(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Band-limited random texture in [0.25, 0.75]."""
    noise = rng.standard_normal((spec.height, spec.width))
    smooth = ndimage.gaussian_filter(noise, sigma=spec.texture_smoothing, mode="reflect")
    lo, hi = smooth.min(), smooth.max()
    return 0.25 + 0.5 * (smooth - lo) / (hi - lo)


def scaled_landmarks(atlas: RegionAtlas, width: int, height: int) -> LandmarkSet:
    """Canonical control points scaled to the clip resolution.

    The scaling is uniform per axis, so mask fitting reduces to the identity
    warp up to that scale and the fitted regions match the injected events.
    """
    pts = atlas.canonical_points.copy()
    pts[:, 0] *= width / CANONICAL_SIZE
    pts[:, 1] *= height / CANONICAL_SIZE
    return LandmarkSet(points=pts, frame_index=0)


def _event_mask(atlas: RegionAtlas, region_id: int, width: int, height: int) -> np.ndarray:
    poly = atlas.region(region_id).polygon.copy()
    poly[:, 0] *= width / CANONICAL_SIZE
    poly[:, 1] *= height / CANONICAL_SIZE
    labels = rasterize_polygon(poly, (height, width), 1)
    return labels.astype(bool)


def event_au_codes(atlas: RegionAtlas, region_id: int) -> tuple[str, ...]:
    """AU codes to record for an injected event.

    Prefers a code that maps back to exactly the injected region, so the
    derived region ground truth is tight; regions without a unique code
    (shared-muscle areas like the forehead) fall back to their full list.
    """
    unique = atlas.unique_au_for_region(region_id)
    if unique is not None:
        return (unique,)
    return atlas.region(region_id).au_codes


def generate(spec: SynthSpec, seed: int, atlas: RegionAtlas | None = None) -> SynthOutput:
    """Deterministically generate a movement clip and its baseline.

    Events add a temporally Gaussian intensity bump (sigma set so the bump
    effectively starts and ends at the recorded onset/offset) inside their
    region polygon; drift shifts whole frames in the Fourier domain; noise
    is i.i.d. Gaussian per pixel and frame, drawn independently for the
    movement and baseline so their statistics match without being equal.
    """
    if atlas is None:
        atlas = default_atlas()
    valid_ids = {r.region_id for r in atlas.regions}
    for e in spec.events:
        if e.region_id not in valid_ids:
            raise ValueError(f"event region {e.region_id} not in atlas")

    rng = np.random.default_rng(seed)
    texture = _texture(spec, rng)
    n = spec.n_frames

    movement = np.repeat(texture[None, :, :], n, axis=0)
    event_masks: dict[int, np.ndarray] = {}
    for e in spec.events:
        mask = _event_mask(atlas, e.region_id, spec.width, spec.height)
        event_masks[e.region_id] = mask
        sigma = (e.offset - e.onset) / 6.0
        t = np.arange(n)
        profile = e.amplitude * np.exp(-0.5 * ((t - e.apex) / sigma) ** 2)
        movement[:, mask] += profile[:, None]

    baseline = np.repeat(texture[None, :, :], n, axis=0)

    dx, dy = spec.drift_per_frame
    if dx or dy:
        for i in range(1, n):
            movement[i] = fourier_shift(movement[i], i * dx, i * dy)

    if spec.noise_sigma > 0:
        movement = movement + rng.normal(0.0, spec.noise_sigma, movement.shape)
        baseline = baseline + rng.normal(0.0, spec.noise_sigma, baseline.shape)

    movement = np.clip(movement, 0.0, 1.0)
    baseline = np.clip(baseline, 0.0, 1.0)

    ground_truth = tuple(
        GroundTruthMovement(
            clip_id=spec.clip_id,
            onset=e.onset,
            apex=e.apex,
            offset=e.offset,
            au_codes=event_au_codes(atlas, e.region_id),
        )
        for e in spec.events
    )
    return SynthOutput(
        sequence=FrameSequence(
            frames=movement,
            fps=spec.fps,
            subject_id=spec.subject_id,
            clip_id=spec.clip_id,
            neutral_pad=spec.neutral_pad,
        ),
        baseline=FrameSequence(
            frames=baseline,
            fps=spec.fps,
            subject_id=spec.subject_id,
            clip_id=f"{spec.clip_id}_baseline",
            neutral_pad=0,
        ),
        landmarks=scaled_landmarks(atlas, spec.width, spec.height),
        ground_truth=ground_truth,
        event_masks=event_masks,
    )


def _write_frames(frames: np.ndarray, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        img = Image.fromarray(np.round(frame * 255.0).astype(np.uint8), mode="L")
        img.save(directory / f"{i:06d}.png")


def write_dataset(outputs: list[SynthOutput], root: str | Path) -> Path:
    """Write clips in the on-disk layout the ingest module reads.

    root/ground_truth.csv
    root/clips/<clip_id>/{manifest.json, landmarks.json, frames/*.png}
    root/baselines/<subject_id>/{manifest.json, landmarks.json, frames/*.png}
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    all_gt: list[GroundTruthMovement] = []
    for out in outputs:
        seq = out.sequence
        clip_dir = root / "clips" / seq.clip_id
        _write_frames(seq.frames, clip_dir / "frames")
        save_manifest(
            {
                "fps": seq.fps,
                "subject_id": seq.subject_id,
                "clip_id": seq.clip_id,
                "neutral_pad": seq.neutral_pad,
            },
            clip_dir / "manifest.json",
        )
        save_landmarks(out.landmarks, clip_dir / "landmarks.json")

        base = out.baseline
        base_dir = root / "baselines" / seq.subject_id
        if not base_dir.exists():
            _write_frames(base.frames, base_dir / "frames")
            save_manifest(
                {
                    "fps": base.fps,
                    "subject_id": base.subject_id,
                    "clip_id": base.clip_id,
                    "neutral_pad": base.neutral_pad,
                },
                base_dir / "manifest.json",
            )
            save_landmarks(out.landmarks, base_dir / "landmarks.json")
        all_gt.extend(out.ground_truth)

    save_ground_truth(all_gt, root / "ground_truth.csv")
    return root


def load_spec_file(path: str | Path) -> list[tuple[SynthSpec, int]]:
    """Parse a synth spec file: {"seed": int, "clips": [{...}, ...]}.

    Each clip entry carries the SynthSpec fields (events as dicts) plus an
    optional per-clip "seed" override.
    """
    raw = json.loads(Path(path).read_text())
    base_seed = int(raw.get("seed", 0))
    specs = []
    for i, entry in enumerate(raw["clips"]):
        events = tuple(SynthEvent(**e) for e in entry.pop("events", []))
        seed = int(entry.pop("seed", base_seed + i))
        specs.append((SynthSpec(events=events, **entry), seed))
    return specs
