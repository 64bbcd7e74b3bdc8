"""microspot: objective spotting of subtle facial micro-movements.

Pipeline: ingest -> subpixel alignment -> region-mask fitting -> per-region
spatio-temporal histogram descriptors -> chi-square difference analysis with
an individualised adaptive baseline threshold -> peak detection with
temporal phase estimates -> region-level evaluation.
"""

from . import accel
from .evaluation import ConfusionCounts, RocCurve, metrics, roc_auc, spot_check
from .features import ExtractConfig, FeatureCube, PlaneSelection, extract
from .geometry import RegionAtlas, RegionMask, default_atlas, fit_region_mask
from .ingest import FrameSequence, GroundTruthMovement, LandmarkSet
from .pipeline import PipelineConfig, load_config, run_pipeline
from .spotting import (
    BaselineProfile,
    DifferenceSignal,
    MicroInterval,
    Peak,
    SpotParams,
    SpottingResult,
    chi_square,
    spot,
)
from .synth import SynthEvent, SynthOutput, SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "BaselineProfile",
    "ConfusionCounts",
    "DifferenceSignal",
    "ExtractConfig",
    "FeatureCube",
    "FrameSequence",
    "GroundTruthMovement",
    "LandmarkSet",
    "MicroInterval",
    "Peak",
    "PipelineConfig",
    "PlaneSelection",
    "RegionAtlas",
    "RegionMask",
    "RocCurve",
    "SpotParams",
    "SpottingResult",
    "SynthEvent",
    "SynthOutput",
    "SynthSpec",
    "accel",
    "chi_square",
    "default_atlas",
    "extract",
    "fit_region_mask",
    "generate",
    "load_config",
    "metrics",
    "roc_auc",
    "run_pipeline",
    "spot",
    "spot_check",
    "__version__",
]
