"""Per-region spatio-temporal histogram descriptors."""

from .cube import (
    FeatureCube,
    PlaneSelection,
    export_cube_text,
    import_cube_text,
    load_cube,
    save_cube,
)
from .denoise import DenoiseConfig, denoise
from .extract import DESCRIPTORS, ConfigError, ExtractConfig, extract
from .gradients import gradients_3d
from .hog3d import hog3d
from .hoof import hoof, horn_schunck
from .lbptop import UNIFORM_BINS, lbptop

__all__ = [
    "DESCRIPTORS",
    "ConfigError",
    "DenoiseConfig",
    "ExtractConfig",
    "FeatureCube",
    "PlaneSelection",
    "UNIFORM_BINS",
    "denoise",
    "export_cube_text",
    "extract",
    "gradients_3d",
    "hog3d",
    "hoof",
    "horn_schunck",
    "import_cube_text",
    "lbptop",
    "load_cube",
    "save_cube",
]
