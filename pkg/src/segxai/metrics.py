"""Pixel-level confusion counts, derived metrics, and baseline deltas.

Percentage bases: TP% and FN% are percentages of the reference-positive
pixel population (so TP% + FN% = 100), FP% is a percentage of the
reference-negative population. Metrics with a zero denominator are None
("undefined"), never coerced to 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from segxai.raster import BinaryMask, RasterError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def ref_positive(self) -> int:
        return self.tp + self.fn

    @property
    def ref_negative(self) -> int:
        return self.fp + self.tn


@dataclass(frozen=True)
class MetricSet:
    """Derived metrics; None marks an undefined (0/0) value."""

    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    iou_micro: Optional[float]
    tp_pct: Optional[float]
    fn_pct: Optional[float]
    fp_pct: Optional[float]
    ref_positive: int
    ref_negative: int


@dataclass(frozen=True)
class DeltaSet:
    """Signed changes of the percentage statistics vs. an unperturbed baseline."""

    tp_drop_pct: Optional[float]
    fp_increase_pct: Optional[float]
    fn_increase_pct: Optional[float]


def confusion(pred: BinaryMask, reference: BinaryMask) -> ConfusionCounts:
    if pred.shape != reference.shape:
        raise RasterError(
            f"dimension mismatch between prediction and reference: "
            f"{pred.shape} vs {reference.shape}"
        )
    p = pred.bits
    r = reference.bits
    tp = int(np.count_nonzero(p & r))
    fp = int(np.count_nonzero(p & ~r))
    fn = int(np.count_nonzero(~p & r))
    tn = p.size - tp - fp - fn
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den > 0 else None


def metric_set(c: ConfusionCounts) -> MetricSet:
    pos = c.ref_positive
    neg = c.ref_negative
    tp_pct = _ratio(100 * c.tp, pos)
    fn_pct = _ratio(100 * c.fn, pos)
    fp_pct = _ratio(100 * c.fp, neg)
    return MetricSet(
        precision=_ratio(c.tp, c.tp + c.fp),
        recall=_ratio(c.tp, pos),
        f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
        iou_micro=_ratio(c.tp, c.tp + c.fp + c.fn),
        tp_pct=tp_pct,
        fn_pct=fn_pct,
        fp_pct=fp_pct,
        ref_positive=pos,
        ref_negative=neg,
    )


def delta_set(baseline: MetricSet, perturbed: MetricSet) -> DeltaSet:
    if baseline.ref_positive != perturbed.ref_positive:
        raise ValueError(
            f"reference-population mismatch: baseline has {baseline.ref_positive} "
            f"positive pixels, perturbed has {perturbed.ref_positive}"
        )
    if baseline.ref_negative != perturbed.ref_negative:
        raise ValueError(
            f"reference-population mismatch: baseline has {baseline.ref_negative} "
            f"negative pixels, perturbed has {perturbed.ref_negative}"
        )

    def diff(a: Optional[float], b: Optional[float]) -> Optional[float]:
        return None if a is None or b is None else a - b

    return DeltaSet(
        tp_drop_pct=diff(baseline.tp_pct, perturbed.tp_pct),
        fp_increase_pct=diff(perturbed.fp_pct, baseline.fp_pct),
        fn_increase_pct=diff(perturbed.fn_pct, baseline.fn_pct),
    )


def aggregate(counts: Iterable[ConfusionCounts]) -> ConfusionCounts:
    """Component-wise sum; micro metrics are metric_set of the result."""
    counts = list(counts)
    if not counts:
        raise ValueError("cannot aggregate an empty sequence of counts")
    total = counts[0]
    for c in counts[1:]:
        total = total + c
    return total
