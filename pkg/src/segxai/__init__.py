"""Perturbation-based faithfulness evaluation for segmentation saliency maps."""

__version__ = "0.1.0"

from segxai.raster import (
    BinaryMask,
    Heatmap,
    ImageRaster,
    RasterError,
    load_heatmap,
    load_image,
    load_mask,
    store_heatmap,
    store_image,
    store_mask,
)
from segxai.perturb import (
    FillPolicy,
    StrategyKind,
    Threshold,
    apply_visibility,
    threshold_heatmap,
    visible_set,
)
from segxai.metrics import (
    ConfusionCounts,
    DeltaSet,
    MetricSet,
    aggregate,
    confusion,
    delta_set,
    metric_set,
)

__all__ = [
    "BinaryMask",
    "ConfusionCounts",
    "DeltaSet",
    "FillPolicy",
    "Heatmap",
    "ImageRaster",
    "MetricSet",
    "RasterError",
    "StrategyKind",
    "Threshold",
    "aggregate",
    "apply_visibility",
    "confusion",
    "delta_set",
    "load_heatmap",
    "load_image",
    "load_mask",
    "metric_set",
    "store_heatmap",
    "store_image",
    "store_mask",
    "threshold_heatmap",
    "visible_set",
]
