"""Heatmap thresholding and strategy-driven image perturbation.

The four strategies decide which pixels of the original image stay visible:

* s1 keeps only the background (complement of the highlighted pixels)
* s2 keeps only the highlighted pixels
* s3gt / s3pm keep the union of highlighted pixels with a reference mask
  (ground truth or the model's predicted mask)

Masked-out pixels are replaced with a constant fill sample.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from segxai.raster import BinaryMask, Heatmap, ImageRaster, RasterError


class StrategyKind(enum.Enum):
    S1_BACKGROUND_ONLY = "s1"
    S2_HIGHLIGHTED_ONLY = "s2"
    S3_XAI_GT = "s3gt"
    S3_XAI_PM = "s3pm"

    @property
    def requires_reference(self) -> bool:
        return self in (StrategyKind.S3_XAI_GT, StrategyKind.S3_XAI_PM)

    @classmethod
    def parse(cls, token: str) -> "StrategyKind":
        try:
            return cls(token.strip().lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown strategy {token!r} (expected one of: {valid})") from None


@dataclass(frozen=True)
class Threshold:
    value: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"threshold must be in [0, 1], got {self.value}")


@dataclass(frozen=True)
class FillPolicy:
    """Constant 8-bit sample applied to every channel of a masked-out pixel."""

    sample: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.sample <= 255):
            raise ValueError(f"fill sample must be an 8-bit value, got {self.sample}")


def threshold_heatmap(h: Heatmap, t: Threshold) -> BinaryMask:
    """Pixels with value >= t are highlighted (so t = 0 highlights everything)."""
    return BinaryMask(h.values >= np.float32(t.value), "relevance")


def _check_same_shape(a, b, what: str) -> None:
    if a.shape != b.shape:
        raise RasterError(f"dimension mismatch between {what}: {a.shape} vs {b.shape}")


def visible_set(
    strategy: StrategyKind,
    relevance: BinaryMask,
    reference: BinaryMask | None = None,
) -> BinaryMask:
    """Mask of pixels that stay visible in the edited image."""
    if strategy.requires_reference:
        if reference is None:
            raise ValueError(f"strategy {strategy.value} requires a reference mask")
        _check_same_shape(relevance, reference, "relevance and reference masks")
        bits = relevance.bits | reference.bits
    else:
        if reference is not None:
            raise ValueError(f"strategy {strategy.value} takes no reference mask")
        if strategy is StrategyKind.S1_BACKGROUND_ONLY:
            bits = ~relevance.bits
        else:
            bits = relevance.bits
    return BinaryMask(bits, "visibility")


def apply_visibility(img: ImageRaster, vis: BinaryMask, fill: FillPolicy) -> ImageRaster:
    """Keep visible pixels, replace the rest with the fill sample on all channels."""
    _check_same_shape(img, vis, "image and visibility mask")
    out = np.where(vis.bits[:, :, np.newaxis], img.samples, np.uint8(fill.sample))
    return ImageRaster(out)
