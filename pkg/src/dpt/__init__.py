"""Dense prediction transformer implemented on a small numpy autograd engine."""

from .archive import ArchiveError, load_weights, save_weights
from .config import ConfigError, DptConfig, EncoderConfig, HybridConfig, parse_config, preset
from .gradcheck import GradcheckReport, gradcheck
from .metrics import (
    DepthEvalPair,
    OrdinalPair,
    align_affine_lsq,
    depth_metrics,
    relative_improvement,
    seg_metrics,
    whdr,
)
from .model import DPT, DptOutput, ShapeError
from .params import count_parameters, param_plan
from .tensor import NumericalError, Tensor, detect_anomaly, no_grad

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "ConfigError",
    "DPT",
    "DepthEvalPair",
    "DptConfig",
    "DptOutput",
    "EncoderConfig",
    "GradcheckReport",
    "HybridConfig",
    "NumericalError",
    "OrdinalPair",
    "ShapeError",
    "Tensor",
    "align_affine_lsq",
    "count_parameters",
    "depth_metrics",
    "detect_anomaly",
    "gradcheck",
    "load_weights",
    "no_grad",
    "param_plan",
    "parse_config",
    "preset",
    "relative_improvement",
    "save_weights",
    "seg_metrics",
    "whdr",
]
