"""Food weight estimation from 2D images.

Crop-level feature extraction, a from-scratch trainable dense regression
head with a pluggable scalar backbone, and the full detection/regression
evaluation metric suite, plus dataset splitting and synthetic fixtures.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend
from .errors import FoodWeightError
from .geometry import BoundingBox, area, clamp_to_image, iou
from .imaging import Image, decode, encode_png
from .features import FeatureScaler, FeatureVector, extract_features, fit_scaler
from .nnet import (
    AdamState,
    DenseLayer,
    ToyBackbone,
    TrainConfig,
    WeightModel,
    adam_step,
    backward,
    forward,
    gradient_check,
    mse_loss,
    predict,
    train,
)
from .detect_eval import (
    COCO_IOU_THRESHOLDS,
    Detection,
    DetectionReport,
    GroundTruth,
    average_iou,
    average_precision,
    classification_accuracy,
    evaluate_detections,
    match_detections,
    mean_average_precision,
)
from .regress_eval import (
    PerClassReport,
    RegressionReport,
    WeightSample,
    evaluate_regression,
    mae,
    mape,
    mse,
    per_class_report,
    r_squared,
    rmse,
)
from .dataset import (
    SampleRecord,
    SplitAssignment,
    generate_synthetic_fixture,
    load_manifest,
    oracle_detector,
    stratified_split,
)

__all__ = [
    "__version__",
    "kernel_backend",
    "FoodWeightError",
    "BoundingBox",
    "area",
    "clamp_to_image",
    "iou",
    "Image",
    "decode",
    "encode_png",
    "FeatureScaler",
    "FeatureVector",
    "extract_features",
    "fit_scaler",
    "AdamState",
    "DenseLayer",
    "ToyBackbone",
    "TrainConfig",
    "WeightModel",
    "adam_step",
    "backward",
    "forward",
    "gradient_check",
    "mse_loss",
    "predict",
    "train",
    "COCO_IOU_THRESHOLDS",
    "Detection",
    "DetectionReport",
    "GroundTruth",
    "average_iou",
    "average_precision",
    "classification_accuracy",
    "evaluate_detections",
    "match_detections",
    "mean_average_precision",
    "PerClassReport",
    "RegressionReport",
    "WeightSample",
    "evaluate_regression",
    "mae",
    "mape",
    "mse",
    "per_class_report",
    "r_squared",
    "rmse",
    "SampleRecord",
    "SplitAssignment",
    "generate_synthetic_fixture",
    "load_manifest",
    "oracle_detector",
    "stratified_split",
]
