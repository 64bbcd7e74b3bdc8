"""Pluggable temporal de-noising applied before feature extraction.

High-speed capture is noisy; the default here is a purely temporal Gaussian,
which preserves frame count and dimensions.  Heavier video de-noisers can be
registered under new method names without touching the extraction code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..ingest import FrameSequence

METHODS = ("none", "temporal_gaussian")


@dataclass(frozen=True)
class DenoiseConfig:
    method: str = "none"
    sigma: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown denoise method {self.method!r}; choose from {METHODS}")
        if self.method == "temporal_gaussian" and self.sigma <= 0:
            raise ValueError("sigma must be positive for temporal_gaussian")


def denoise(seq: FrameSequence, cfg: DenoiseConfig | None = None) -> FrameSequence:
    """Return a de-noised copy of the sequence (same frame count and size)."""
    if cfg is None or cfg.method == "none":
        return seq
    smoothed = ndimage.gaussian_filter1d(seq.frames, sigma=cfg.sigma, axis=0, mode="nearest")
    return seq.with_frames(np.clip(smoothed, 0.0, 1.0))
