"""Saliency-based dermoscopic lesion segmentation."""

from .evalkit import batch_evaluate, mask_metrics, roc_auc
from .modelio import load_model, save_model
from .saliency import PipelineConfig, SaliencyModel, predict_saliency, train_saliency
from .segment import segment_from_saliency
from .synthgen import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "SaliencyModel",
    "SynthSpec",
    "batch_evaluate",
    "generate",
    "load_model",
    "mask_metrics",
    "predict_saliency",
    "roc_auc",
    "save_model",
    "segment_from_saliency",
    "train_saliency",
    "__version__",
]
