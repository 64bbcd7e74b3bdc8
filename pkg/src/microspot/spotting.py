"""Micro-movement spotting from per-region feature streams.

Each frame's histogram is compared (chi-square) against the average of the
histograms k frames before and after it; the resulting difference series is
contrasted by subtracting the mean of its own values k frames away, clamped
at zero.  Peaks above the subject's adaptive baseline threshold become
detections, with Gaussian-model onset/offset estimates and a micro-duration
filter.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features.cube import FeatureCube


class SpottingConfigError(ValueError):
    """A spotting parameter is invalid."""


@dataclass(frozen=True)
class MicroInterval:
    """The temporal comparison window: N frames, half-interval k = (N-1)/2."""

    N: int

    def __post_init__(self):
        if self.N < 3 or self.N % 2 == 0:
            raise SpottingConfigError(f"micro-interval N must be odd and >= 3, got {self.N}")

    @property
    def k(self) -> int:
        return (self.N - 1) // 2


def micro_interval(N: int) -> MicroInterval:
    return MicroInterval(N=N)


def chi_square(p: np.ndarray, q: np.ndarray) -> float:
    """Chi-square histogram distance: sum over bins of (P-Q)^2 / (P+Q).

    Bins that are empty in both histograms contribute nothing.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"histogram length mismatch: {p.shape} vs {q.shape}")
    num = (p - q) ** 2
    den = p + q
    mask = den != 0
    return float(np.sum(num[mask] / den[mask]))


def _chi_square_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise chi-square over the last axis (vectorised helper)."""
    num = (p - q) ** 2
    den = p + q
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0)
    return out.sum(axis=-1)


@dataclass(frozen=True)
class DifferenceSignal:
    """Raw and contrasted per-region difference series.

    ``raw[r, i]`` is defined for i in [k, n-1-k]; ``values[r, i]`` (the
    contrasted signal) for i in [2k, n-1-2k].  Undefined frames hold NaN and
    never contribute to thresholds or peaks.
    """

    raw: np.ndarray
    values: np.ndarray
    k: int
    region_ids: tuple[int, ...]

    def __post_init__(self):
        raw = np.ascontiguousarray(self.raw, dtype=np.float64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        raw.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "region_ids", tuple(self.region_ids))

    @property
    def n_frames(self) -> int:
        return self.raw.shape[1]

    @property
    def raw_valid_range(self) -> tuple[int, int]:
        return self.k, self.n_frames - 1 - self.k

    @property
    def valid_range(self) -> tuple[int, int]:
        return 2 * self.k, self.n_frames - 1 - 2 * self.k


def difference_signal(cube: FeatureCube, mi: MicroInterval) -> DifferenceSignal:
    """Chi-square distance of each frame to the mean of its +/-k neighbours.

    Histograms are compared on the concatenated selected-plane vector.  The
    contrasted stage is left NaN; apply :func:`contrast` to fill it.
    """
    k = mi.k
    n = cube.n_frames
    if n < 2 * k + 1:
        raise ValueError(
            f"sequence too short for N={mi.N}: need at least {2 * k + 1} frames, have {n}"
        )
    data = cube.data
    raw = np.full((cube.n_regions, n), np.nan)
    centre = data[:, k : n - k, :]
    average = 0.5 * (data[:, : n - 2 * k, :] + data[:, 2 * k :, :])
    raw[:, k : n - k] = _chi_square_rows(centre, average)
    values = np.full_like(raw, np.nan)
    return DifferenceSignal(raw=raw, values=values, k=k, region_ids=cube.region_ids)


def contrast(signal: DifferenceSignal) -> DifferenceSignal:
    """Subtract the mean of the values +/-k frames away; clamp negatives to 0.

    Negative values mean the current frame sits below its surroundings'
    average difference, i.e. no fast change is happening there.
    """
    k = signal.k
    n = signal.n_frames
    raw = signal.raw
    values = np.full_like(raw, np.nan)
    lo, hi = 2 * k, n - 1 - 2 * k
    if lo <= hi:
        centre = raw[:, lo : hi + 1]
        neighbours = 0.5 * (raw[:, k : k + (hi - lo) + 1] + raw[:, 3 * k : 3 * k + (hi - lo) + 1])
        values[:, lo : hi + 1] = np.maximum(centre - neighbours, 0.0)
    return DifferenceSignal(raw=raw, values=values, k=k, region_ids=signal.region_ids)


def top_r_aggregate(signal: DifferenceSignal, top_r: int, stage: str = "values") -> np.ndarray:
    """Per-frame sum of the R largest per-region values (whole-face series).

    Regions are ranked per frame in descending order of their difference
    value (ties broken by lower region id).  Undefined frames stay NaN.
    """
    if not 1 <= top_r <= len(signal.region_ids):
        raise SpottingConfigError(
            f"top_r must be in [1, {len(signal.region_ids)}], got {top_r}"
        )
    series = getattr(signal, stage)
    # descending sort with lower-region-id tie break: stable sort on (-value)
    order = np.argsort(-series, axis=0, kind="stable")
    ranked = np.take_along_axis(series, order[:top_r], axis=0)
    return ranked.sum(axis=0)


@dataclass(frozen=True)
class BaselineProfile:
    """Per-region baseline statistics and the adaptive threshold.

    ``abt[j]`` is the threshold for region_ids[j]: the baseline maximum when
    that already exceeds the movement-signal mean, otherwise the midpoint of
    the movement and baseline means.
    """

    region_ids: tuple[int, ...]
    baseline_max: np.ndarray
    baseline_mean: np.ndarray
    movement_mean: np.ndarray
    abt: np.ndarray

    def threshold(self, region_id: int) -> float:
        return float(self.abt[self.region_ids.index(region_id)])


def adaptive_threshold(baseline_values: np.ndarray, movement_mean: float) -> float:
    """Adaptive baseline threshold for one region.

    max(baseline) when it exceeds the movement mean; otherwise the average
    of the movement mean and the baseline mean.
    """
    finite = baseline_values[np.isfinite(baseline_values)]
    if finite.size == 0:
        raise ValueError("baseline signal has no defined frames")
    b_max = float(finite.max())
    b_mean = float(finite.mean())
    if b_max > movement_mean:
        return b_max
    return 0.5 * (movement_mean + b_mean)


def baseline_profile(
    baseline_cube: FeatureCube, movement_signal: DifferenceSignal, mi: MicroInterval
) -> BaselineProfile:
    """Process the baseline like a movement and derive per-region thresholds."""
    k = mi.k
    if baseline_cube.n_frames < 4 * k + 1:
        raise ValueError(
            f"baseline too short to contrast: need at least {4 * k + 1} frames, "
            f"have {baseline_cube.n_frames}"
        )
    if baseline_cube.region_ids != movement_signal.region_ids:
        raise ValueError("baseline and movement cover different regions")
    rho = contrast(difference_signal(baseline_cube, mi))

    n_regions = len(movement_signal.region_ids)
    b_max = np.empty(n_regions)
    b_mean = np.empty(n_regions)
    m_mean = np.empty(n_regions)
    abt = np.empty(n_regions)
    for j in range(n_regions):
        base = rho.values[j][np.isfinite(rho.values[j])]
        move = movement_signal.values[j][np.isfinite(movement_signal.values[j])]
        if move.size == 0:
            raise ValueError("movement signal has no defined frames")
        b_max[j] = base.max()
        b_mean[j] = base.mean()
        m_mean[j] = move.mean()
        abt[j] = adaptive_threshold(base, m_mean[j])
    return BaselineProfile(
        region_ids=movement_signal.region_ids,
        baseline_max=b_max,
        baseline_mean=b_mean,
        movement_mean=m_mean,
        abt=abt,
    )


@dataclass(frozen=True)
class Peak:
    """One detected movement: temporal phases plus peak shape parameters."""

    region_id: int
    onset: int
    apex: int
    offset: int
    height: float
    width: float
    position: float

    def __post_init__(self):
        if not (self.onset <= self.apex <= self.offset):
            raise ValueError(
                f"require onset <= apex <= offset, got "
                f"({self.onset}, {self.apex}, {self.offset})"
            )


@dataclass(frozen=True)
class PeakParams:
    """Peak detector knobs: derivative smoothing, slope gate, merge radius."""

    smooth_width: int = 3
    slope_threshold: float = 0.0
    min_separation: int = 1

    def __post_init__(self):
        if self.smooth_width < 1:
            raise SpottingConfigError("smooth_width must be >= 1")
        if self.min_separation < 0:
            raise SpottingConfigError("min_separation must be >= 0")


def peak_phase_delta(width: float, height_fraction: float) -> float:
    """Frames from a Gaussian peak's centre to where it falls to a fraction
    of its height, given its full width at half maximum."""
    if not 0.0 < height_fraction <= 1.0:
        raise SpottingConfigError(
            f"height fraction must be in (0, 1], got {height_fraction}"
        )
    return width * math.sqrt(math.log(1.0 / height_fraction) / (4.0 * math.log(2.0)))


def peak_phases(peak: Peak, height_fraction: float,
                valid_range: tuple[int, int]) -> Peak:
    """Fill in onset/offset from the Gaussian model, clamped to the signal."""
    delta = peak_phase_delta(peak.width, height_fraction)
    lo, hi = valid_range
    onset = int(round(min(max(peak.position - delta, lo), hi)))
    offset = int(round(min(max(peak.position + delta, lo), hi)))
    apex = min(max(peak.apex, onset), offset)
    return Peak(
        region_id=peak.region_id,
        onset=onset,
        apex=apex,
        offset=offset,
        height=peak.height,
        width=peak.width,
        position=peak.position,
    )


def _triangular_smooth(values: np.ndarray, width: int) -> np.ndarray:
    if width < 2 or values.size < 3:
        return values
    half = width // 2
    kernel = np.concatenate([np.arange(1, half + 2), np.arange(half, 0, -1)]).astype(float)
    kernel /= kernel.sum()
    padded = np.pad(values, half, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def _fwhm(values: np.ndarray, apex_idx: int) -> float:
    """Full width at half maximum around a local peak, interpolated."""
    half = values[apex_idx] / 2.0
    left = float(apex_idx)
    for i in range(apex_idx - 1, -1, -1):
        if values[i] <= half:
            left = i + (half - values[i]) / (values[i + 1] - values[i])
            break
        left = float(i)
    right = float(apex_idx)
    for i in range(apex_idx + 1, len(values)):
        if values[i] <= half:
            right = i - (half - values[i]) / (values[i - 1] - values[i])
            break
        right = float(i)
    return max(right - left, 1.0)


def detect_peaks(
    series: np.ndarray,
    threshold: float,
    params: PeakParams,
    region_id: int = 0,
) -> list[Peak]:
    """Find peaks as downward zero-crossings of the smoothed derivative.

    A crossing survives when its local slope exceeds ``slope_threshold`` and
    the signal at the nearest frame strictly exceeds ``threshold``.  Peaks
    closer than ``min_separation`` frames are merged keeping the higher.
    Onset/offset are left equal to the apex; apply :func:`peak_phases`.
    """
    series = np.asarray(series, dtype=np.float64)
    finite = np.isfinite(series)
    if not finite.any():
        return []
    i0 = int(np.argmax(finite))
    i1 = len(series) - 1 - int(np.argmax(finite[::-1]))
    window = series[i0 : i1 + 1]
    if not np.isfinite(window).all():
        raise ValueError("signal has interior undefined frames")
    if window.size < 3:
        return []

    deriv = np.diff(window)
    deriv = _triangular_smooth(deriv, params.smooth_width)

    candidates = []
    for j in range(len(deriv) - 1):
        if deriv[j] > 0.0 >= deriv[j + 1]:
            slope = deriv[j] - deriv[j + 1]
            if slope < params.slope_threshold:
                continue
            # derivative samples sit at half-frames: crossing between j+.5, j+1.5
            frac = deriv[j] / (deriv[j] - deriv[j + 1]) if deriv[j] != deriv[j + 1] else 0.5
            position = j + 0.5 + frac
            apex = int(round(position))
            apex = min(max(apex, 0), len(window) - 1)
            # snap to the true local maximum neighbourhood
            lo = max(apex - 1, 0)
            hi = min(apex + 2, len(window))
            apex = lo + int(np.argmax(window[lo:hi]))
            height = float(window[apex])
            if height > threshold:
                candidates.append((position, apex, height))

    merged: list[tuple[float, int, float]] = []
    for cand in candidates:
        if merged and abs(cand[0] - merged[-1][0]) < params.min_separation:
            if cand[2] > merged[-1][2]:
                merged[-1] = cand
        else:
            merged.append(cand)

    peaks = []
    for position, apex, height in merged:
        width = _fwhm(window, apex)
        peaks.append(
            Peak(
                region_id=region_id,
                onset=apex + i0,
                apex=apex + i0,
                offset=apex + i0,
                height=height,
                width=width,
                position=position + i0,
            )
        )
    return peaks


@dataclass(frozen=True)
class SpotParams:
    """Everything the spotting stage needs beyond the feature cubes."""

    mi: MicroInterval = field(default_factory=lambda: MicroInterval(71))
    top_r: int = 12
    height_fraction: float = 0.01
    peak: PeakParams | None = None
    micro_max_ms: float = 500.0

    def __post_init__(self):
        if not 1 <= self.top_r <= 26:
            raise SpottingConfigError(f"top_r must be in [1, 26], got {self.top_r}")
        if not 0.0 < self.height_fraction <= 1.0:
            raise SpottingConfigError("height_fraction must be in (0, 1]")
        if self.peak is None:
            k = self.mi.k
            object.__setattr__(
                self,
                "peak",
                PeakParams(smooth_width=max(k // 2, 1), min_separation=k),
            )


@dataclass(frozen=True)
class SpottingResult:
    """Detected peaks for one clip plus the thresholds that gated them."""

    clip_id: str
    subject_id: str
    fps: float
    peaks: tuple[Peak, ...]
    abt: dict[int, float]
    region_ranking: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))
        object.__setattr__(self, "region_ranking", tuple(self.region_ranking))


def rank_regions(signal: DifferenceSignal) -> list[int]:
    """Region ids ordered by their maximum contrasted value over the clip."""
    scores = []
    for j, rid in enumerate(signal.region_ids):
        vals = signal.values[j][np.isfinite(signal.values[j])]
        scores.append((-(vals.max() if vals.size else 0.0), rid))
    return [rid for _, rid in sorted(scores)]


def spot(
    movement_cube: FeatureCube,
    baseline_cube: FeatureCube,
    params: SpotParams,
    fps: float,
    clip_id: str = "",
    subject_id: str = "",
) -> SpottingResult:
    """Full spotting pipeline for one clip.

    difference -> contrast -> per-region thresholds -> per-region peaks ->
    Gaussian phase estimates; only peaks from the ``top_r`` regions (ranked
    by maximum contrasted value over the clip) are emitted, and any peak
    longer than the micro-movement duration limit is discarded.
    """
    if not movement_cube.compatible_with(baseline_cube):
        raise ValueError("movement and baseline cubes have different layouts")
    signal = contrast(difference_signal(movement_cube, params.mi))
    profile = baseline_profile(baseline_cube, signal, params.mi)

    ranking = rank_regions(signal)
    emit_regions = set(ranking[: params.top_r])
    valid = signal.valid_range
    max_len = params.micro_max_ms / 1000.0 * fps

    peaks: list[Peak] = []
    for j, rid in enumerate(signal.region_ids):
        found = detect_peaks(signal.values[j], profile.abt[j], params.peak, region_id=rid)
        for p in found:
            p = peak_phases(p, params.height_fraction, valid)
            if rid in emit_regions and (p.offset - p.onset) <= max_len:
                peaks.append(p)

    peaks.sort(key=lambda p: (p.region_id, p.apex))
    return SpottingResult(
        clip_id=clip_id,
        subject_id=subject_id,
        fps=fps,
        peaks=tuple(peaks),
        abt={rid: float(profile.abt[j]) for j, rid in enumerate(signal.region_ids)},
        region_ranking=tuple(ranking),
    )


def save_result(result: SpottingResult, path: str | Path) -> None:
    """Serialise a SpottingResult to structured text (JSON)."""
    payload = {
        "clip_id": result.clip_id,
        "subject_id": result.subject_id,
        "fps": result.fps,
        "region_ranking": list(result.region_ranking),
        "abt": {str(r): v for r, v in sorted(result.abt.items())},
        "peaks": [
            {
                "region_id": p.region_id,
                "onset": p.onset,
                "apex": p.apex,
                "offset": p.offset,
                "height": p.height,
                "width": p.width,
                "position": p.position,
                "abt": result.abt[p.region_id],
            }
            for p in result.peaks
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def load_result(path: str | Path) -> SpottingResult:
    raw = json.loads(Path(path).read_text())
    peaks = tuple(
        Peak(
            region_id=p["region_id"],
            onset=p["onset"],
            apex=p["apex"],
            offset=p["offset"],
            height=p["height"],
            width=p["width"],
            position=p["position"],
        )
        for p in raw["peaks"]
    )
    return SpottingResult(
        clip_id=raw["clip_id"],
        subject_id=raw["subject_id"],
        fps=raw["fps"],
        peaks=peaks,
        abt={int(r): v for r, v in raw["abt"].items()},
        region_ranking=tuple(raw["region_ranking"]),
    )
