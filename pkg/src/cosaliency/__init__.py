"""Image co-saliency detection on superpixel graphs.

Pipeline: SLIC superpixels, descriptor pooling, an inter-image saliency scorer,
manifold ranking on a two-layer group graph, and standard saliency metrics.
"""
from .config import Config
from .cosal import GroupResult, detect_group
from .errors import CosalError
from .evaluation import MetricReport, evaluate
from .kernels import BACKEND

__all__ = ["BACKEND", "Config", "CosalError", "GroupResult", "MetricReport", "detect_group", "evaluate"]
__version__ = "0.1.0"
