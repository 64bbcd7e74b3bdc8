"""Histogram of oriented optical flow per region (Horn-Schunck flow)."""

from __future__ import annotations

import numpy as np

from .. import accel
from ..geometry.regions import RegionMask
from ..ingest import FrameSequence
from . import _kernels
from .cube import FeatureCube

DEFAULT_BINS = 8
DEFAULT_ALPHA = 15.0
DEFAULT_ITERATIONS = 100

# below this total magnitude a histogram is genuinely empty: normalising it
# would amplify numerical dust into a full-weight histogram
_L1_EPS = 1e-12

FLOW_PLANES = ("FLOW",)


def horn_schunck(
    f1: np.ndarray,
    f2: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    iterations: int = DEFAULT_ITERATIONS,
) -> tuple[np.ndarray, np.ndarray]:
    """Dense (u, v) flow from frame f1 to frame f2."""
    f1 = np.ascontiguousarray(f1, dtype=np.float64)
    f2 = np.ascontiguousarray(f2, dtype=np.float64)
    ix, iy, it = _kernels.hs_derivatives(f1, f2)
    if accel.numba_enabled():
        return _kernels.horn_schunck_numba(ix, iy, it, alpha, iterations)
    return _kernels.horn_schunck_numpy(ix, iy, it, alpha, iterations)


def hoof(
    seq: FrameSequence,
    mask: RegionMask,
    bins: int = DEFAULT_BINS,
    alpha: float = DEFAULT_ALPHA,
    iterations: int = DEFAULT_ITERATIONS,
) -> FeatureCube:
    """Flow-orientation histograms per region and frame.

    Flow is computed between consecutive frames and assigned to the later
    frame; frame 0 is all zeros.  Orientations are folded symmetric about
    the vertical axis (leftward and rightward motion bin together), binned
    over [-pi/2, pi/2] with magnitude weighting, L1-normalised per
    histogram, then divided by region pixel area.
    """
    if seq.n_frames < 2:
        raise ValueError("need at least 2 frames for optical flow")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if (mask.areas[1:] == 0).any():
        raise ValueError("mask contains empty regions")
    if mask.labels.shape != (seq.height, seq.width):
        raise ValueError("mask and sequence dimensions differ")

    n_regions = mask.n_regions
    n = seq.n_frames
    lab = mask.labels.ravel()
    sel = lab > 0
    lab0 = (lab[sel] - 1).astype(np.int64)
    areas = mask.areas[1:].astype(np.float64)

    hist = np.zeros((n_regions, n, bins))
    for t in range(1, n):
        u, v = horn_schunck(seq.frames[t - 1], seq.frames[t], alpha, iterations)
        uu = u.ravel()[sel]
        vv = v.ravel()[sel]
        mag = np.hypot(uu, vv)
        theta = np.arctan2(vv, uu)
        # fold onto [-pi/2, pi/2]: mirror vectors pointing left
        theta = np.where(theta > np.pi / 2, np.pi - theta, theta)
        theta = np.where(theta < -np.pi / 2, -np.pi - theta, theta)
        idx = np.minimum(((theta + np.pi / 2) / np.pi * bins).astype(np.int64), bins - 1)
        counts = np.bincount(lab0 * bins + idx, weights=mag, minlength=n_regions * bins)
        hist[:, t, :] = counts.reshape(n_regions, bins)

    totals = hist.sum(axis=2, keepdims=True)
    np.divide(hist, totals, out=hist, where=totals > _L1_EPS)
    hist /= areas[:, None, None]

    return FeatureCube(
        descriptor="hoof",
        planes=FLOW_PLANES,
        bins_per_plane=bins,
        region_ids=tuple(range(1, n_regions + 1)),
        data=hist,
    )
