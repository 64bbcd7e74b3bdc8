"""Spatio-temporal intensity gradients of a frame stack."""

from __future__ import annotations

import numpy as np

from ..ingest import FrameSequence


def gradients_3d(seq: FrameSequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel (Ix, Iy, It) volumes over the whole sequence.

    Central differences in the interior; first/last frames, rows, and
    columns fall back to one-sided differences.
    """
    if seq.n_frames < 3:
        raise ValueError(f"need at least 3 frames for temporal gradients, got {seq.n_frames}")
    it, iy, ix = np.gradient(seq.frames, axis=(0, 1, 2), edge_order=1)
    return ix, iy, it
