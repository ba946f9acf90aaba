"""Patch-wise hand-crafted sharpness features and boosted trees for blur classification."""

from .errors import PatchBlurError
from .evaluation import EvalReport, FoldPlan, cross_validate, make_folds, roc_auc
from .features import FeatureParams, Region, extract_features
from .gbdt import GbdtModel, TrainParams, load_model, predict_label, predict_proba, save_model, train
from .grid import FeatureConfig, FeatureVector, Variant, extract_vector, split_grid, vector_length
from .ingest import GrayImage, load_gray, resize_bilinear, scan_dataset

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "FeatureConfig",
    "FeatureParams",
    "FeatureVector",
    "FoldPlan",
    "GbdtModel",
    "GrayImage",
    "PatchBlurError",
    "Region",
    "TrainParams",
    "Variant",
    "cross_validate",
    "extract_features",
    "extract_vector",
    "load_gray",
    "load_model",
    "make_folds",
    "predict_label",
    "predict_proba",
    "resize_bilinear",
    "roc_auc",
    "save_model",
    "scan_dataset",
    "split_grid",
    "train",
    "vector_length",
]
