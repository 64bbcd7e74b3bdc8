"""3D histogram of oriented gradients over the three orthogonal planes."""

from __future__ import annotations

import numpy as np

from .. import accel
from ..geometry.regions import RegionMask
from ..ingest import FrameSequence
from . import _kernels
from .cube import FeatureCube, PlaneSelection
from .gradients import gradients_3d

_PLANE_INDEX = {"XY": 0, "XT": 1, "YT": 2}

DEFAULT_BINS = 8


def hog3d(
    seq: FrameSequence,
    mask: RegionMask,
    planes: PlaneSelection = PlaneSelection.ALL,
    bins: int = DEFAULT_BINS,
) -> FeatureCube:
    """Per-region, per-frame oriented-gradient histograms.

    Orientations are signed over [0, 2pi) with ``bins`` bins and linear
    interpolation between adjacent bins; votes are gradient-pair magnitudes
    summed over each region's pixels, then divided by the region's pixel
    area so differently sized regions compare fairly.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    if (mask.areas[1:] == 0).any():
        raise ValueError("mask contains empty regions")
    if mask.labels.shape != (seq.height, seq.width):
        raise ValueError("mask and sequence dimensions differ")

    ix, iy, it = gradients_3d(seq)
    n_regions = mask.n_regions
    if accel.numba_enabled():
        hist = _kernels.hog3d_hist_numba(ix, iy, it, mask.labels, n_regions, bins)
    else:
        hist = _kernels.hog3d_hist_numpy(ix, iy, it, mask.labels, n_regions, bins)

    hist /= mask.areas[1:, None, None, None].astype(np.float64)

    keep = [_PLANE_INDEX[p] for p in planes.planes]
    data = hist[:, :, keep, :].reshape(n_regions, seq.n_frames, len(keep) * bins)
    return FeatureCube(
        descriptor="hog3d",
        planes=planes.planes,
        bins_per_plane=bins,
        region_ids=tuple(range(1, n_regions + 1)),
        data=data,
    )
