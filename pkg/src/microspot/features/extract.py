"""Descriptor dispatch: de-noise, then extract the configured features."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from ..geometry.regions import RegionMask
from ..ingest import FrameSequence
from .cube import FeatureCube, PlaneSelection
from .denoise import DenoiseConfig, denoise
from .hog3d import hog3d
from .hoof import hoof
from .lbptop import lbptop

DESCRIPTORS = ("hog3d", "lbptop", "hoof")


class ConfigError(ValueError):
    """An extraction parameter is invalid."""


@dataclass(frozen=True)
class ExtractConfig:
    """Everything the extraction stage needs, in one validated bundle."""

    descriptor: str = "hog3d"
    planes: PlaneSelection = PlaneSelection.XT
    bins: int = 8
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    lbp_radii: tuple[int, int, int] = (1, 1, 1)
    hoof_alpha: float = 15.0
    hoof_iterations: int = 100

    def __post_init__(self):
        if self.descriptor not in DESCRIPTORS:
            raise ConfigError(
                f"unknown descriptor {self.descriptor!r}; choose from {DESCRIPTORS}"
            )
        if self.bins < 1:
            raise ConfigError("bins must be positive")


def extract(seq: FrameSequence, mask: RegionMask, cfg: ExtractConfig) -> FeatureCube:
    """De-noise, then run the configured descriptor over the masked sequence."""
    seq = denoise(seq, cfg.denoise)
    if cfg.descriptor == "hog3d":
        return hog3d(seq, mask, planes=cfg.planes, bins=cfg.bins)
    if cfg.descriptor == "lbptop":
        return lbptop(seq, mask, planes=cfg.planes, radii=cfg.lbp_radii)
    # hoof: flow is inherently temporal, so plane selection does not apply
    if cfg.planes is not PlaneSelection.ALL:
        warnings.warn(
            "hoof ignores plane selection; one flow histogram per frame", stacklevel=2
        )
    return hoof(
        seq,
        mask,
        bins=cfg.bins,
        alpha=cfg.hoof_alpha,
        iterations=cfg.hoof_iterations,
    )
