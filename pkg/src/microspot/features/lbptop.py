"""Local binary patterns on the three orthogonal planes (uniform-59 bins)."""

from __future__ import annotations

import numpy as np

from .. import accel
from ..geometry.regions import RegionMask
from ..ingest import FrameSequence
from . import _kernels
from .cube import FeatureCube, PlaneSelection

_PLANE_INDEX = {"XY": 0, "XT": 1, "YT": 2}

UNIFORM_BINS = 59

_UNIFORM_TABLE = _kernels.uniform_lbp_table(8)


def lbptop(
    seq: FrameSequence,
    mask: RegionMask,
    planes: PlaneSelection = PlaneSelection.ALL,
    neighbours: int = 8,
    radii: tuple[int, int, int] = (1, 1, 1),
) -> FeatureCube:
    """Per-region, per-frame uniform-LBP histograms on each plane slice.

    Neighbours on the sampling ring are rounded to the nearest pixel and the
    comparison is ``neighbour >= centre``.  Frames within the temporal
    radius of the sequence ends use edge-replicated temporal neighbours, so
    every frame is represented.  Histogram counts are divided by region
    pixel area.
    """
    if neighbours != 8:
        raise ValueError("only 8 neighbours are supported (uniform-59 mapping)")
    if any(r < 1 for r in radii):
        raise ValueError(f"radii must be >= 1, got {radii}")
    if seq.n_frames < radii[2] + 1:
        raise ValueError(
            f"sequence too short for temporal radius {radii[2]}: {seq.n_frames} frames"
        )
    if (mask.areas[1:] == 0).any():
        raise ValueError("mask contains empty regions")
    if mask.labels.shape != (seq.height, seq.width):
        raise ValueError("mask and sequence dimensions differ")

    offsets = _kernels.lbp_offsets(radii)
    if accel.numba_enabled():
        codes = _kernels.lbp_codes_numba(seq.frames, offsets)
    else:
        codes = _kernels.lbp_codes_numpy(seq.frames, offsets)

    n_regions = mask.n_regions
    n = seq.n_frames
    lab = mask.labels.ravel()
    sel = lab > 0
    lab0 = (lab[sel] - 1).astype(np.int64)
    hist = np.zeros((n_regions, n, 3, UNIFORM_BINS))
    for plane in range(3):
        mapped = _UNIFORM_TABLE[codes[plane].reshape(n, -1)[:, sel]]
        for t in range(n):
            counts = np.bincount(
                lab0 * UNIFORM_BINS + mapped[t], minlength=n_regions * UNIFORM_BINS
            )
            hist[:, t, plane, :] = counts.reshape(n_regions, UNIFORM_BINS)

    hist /= mask.areas[1:, None, None, None].astype(np.float64)

    keep = [_PLANE_INDEX[p] for p in planes.planes]
    data = hist[:, :, keep, :].reshape(n_regions, n, len(keep) * UNIFORM_BINS)
    return FeatureCube(
        descriptor="lbptop",
        planes=planes.planes,
        bins_per_plane=UNIFORM_BINS,
        region_ids=tuple(range(1, n_regions + 1)),
        data=data,
    )
