"""Frame alignment, piecewise affine warping, and face-region fitting."""

from .register import (
    DegenerateInputError,
    Translation,
    align_sequence,
    estimate_drift,
    fourier_shift,
    register_translation,
    shift_frame,
)
from .regions import (
    AtlasError,
    FileLandmarkProvider,
    MaskFitError,
    N_REGIONS,
    Region,
    RegionAtlas,
    RegionMask,
    canonical_mask,
    default_atlas,
    fit_region_mask,
    load_atlas,
    rasterize_polygon,
)
from .warp import (
    DegenerateGeometryError,
    TriangleMesh,
    barycentric,
    delaunay,
    map_points,
    pwa_warp,
)

__all__ = [
    "AtlasError",
    "DegenerateGeometryError",
    "DegenerateInputError",
    "FileLandmarkProvider",
    "MaskFitError",
    "N_REGIONS",
    "Region",
    "RegionAtlas",
    "RegionMask",
    "Translation",
    "TriangleMesh",
    "align_sequence",
    "barycentric",
    "canonical_mask",
    "default_atlas",
    "delaunay",
    "estimate_drift",
    "fit_region_mask",
    "fourier_shift",
    "load_atlas",
    "map_points",
    "pwa_warp",
    "rasterize_polygon",
    "register_translation",
    "shift_frame",
]
