"""Render run results as count tables, metric tables, and flat exports.

Values are rendered at a fixed number of decimals using round-half-away-from-
zero; undefined metrics render as an em-dash placeholder. Best-method flags
are computed on the rendered (rounded) values, so methods that tie at the
rendered precision are all flagged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional

from segxai.metrics import metric_set
from segxai.pipeline import (
    CellKey,
    ConfigError,
    RunResult,
    fmt_threshold,
    result_to_json,
)
from segxai.perturb import StrategyKind

UNDEFINED = "—"

MODEL_COLUMN = "Model"

# better-direction defaults: strategy -> {statistic: "higher" | "lower"}
# s1 removes the highlighted pixels, so a faithful explanation hurts the model
# (all changes higher-better); s2/s3 keep them, so small changes are better.
DELTA_STATS = ("tp_drop", "fp_increase", "fn_increase")
METRIC_STATS = ("iou", "precision", "recall", "f1")


def default_directions() -> dict[str, dict[str, str]]:
    directions: dict[str, dict[str, str]] = {}
    for strategy in StrategyKind:
        if strategy is StrategyKind.S1_BACKGROUND_ONLY:
            deltas = {stat: "higher" for stat in DELTA_STATS}
            metrics = {stat: "lower" for stat in METRIC_STATS}
        else:
            deltas = {stat: "lower" for stat in DELTA_STATS}
            metrics = {stat: "higher" for stat in METRIC_STATS}
        directions[strategy.value] = {**deltas, **metrics}
    return directions


@dataclass(frozen=True)
class ReportSpec:
    formats: tuple[str, ...] = ("markdown",)
    focus_threshold: float = 0.4
    decimals: int = 2
    directions: dict[str, dict[str, str]] = field(default_factory=default_directions)

    def __post_init__(self) -> None:
        for fmt in self.formats:
            if fmt not in ("csv", "json", "markdown"):
                raise ConfigError(f"unknown report format {fmt!r}")


def round_half_away(value: float, decimals: int) -> float:
    q = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def render_value(value: Optional[float], decimals: int) -> str:
    if value is None:
        return UNDEFINED
    return f"{round_half_away(value, decimals):.{decimals}f}"


@dataclass
class TableRow:
    label: str
    cells: list[str]
    flags: list[bool]


@dataclass
class Table:
    title: str
    columns: list[str]
    rows: list[TableRow]


def _flag_best(values: list[Optional[float]], direction: str, decimals: int) -> list[bool]:
    """Flag every column holding the best rounded value; undefined never wins."""
    rounded = [None if v is None else round_half_away(v, decimals) for v in values]
    defined = [r for r in rounded if r is not None]
    if not defined:
        return [False] * len(values)
    best = max(defined) if direction == "higher" else min(defined)
    return [r is not None and r == best for r in rounded]


def _cells_for(result: RunResult, strategy: StrategyKind, threshold: float) -> list[tuple[str, object]]:
    cells = []
    for method in result.metadata.get("methods", []):
        key = CellKey(method, threshold, strategy)
        if key not in result.cells:
            raise ConfigError(
                f"missing result cell for method {method!r}, "
                f"threshold {fmt_threshold(threshold)}, strategy {strategy.value}"
            )
        cells.append((method, result.cells[key]))
    if not cells:
        raise ConfigError(f"no cells recorded for strategy {strategy.value}")
    return cells


def _direction(spec: ReportSpec, strategy: StrategyKind, stat: str) -> str:
    return spec.directions.get(strategy.value, {}).get(stat, "lower")


def emit_count_table(
    result: RunResult,
    strategy: StrategyKind,
    threshold: float,
    spec: ReportSpec = ReportSpec(),
) -> Table:
    if result.baseline is None:
        raise ConfigError("count table requires a baseline result")
    cells = _cells_for(result, strategy, threshold)
    methods = [m for m, _ in cells]
    d = spec.decimals

    def count_row(label, base_value, values):
        return TableRow(label, [str(base_value)] + [str(v) for v in values], [False] * (len(values) + 1))

    def pct_row(label, base_value, values):
        return TableRow(
            label,
            [render_value(base_value, d)] + [render_value(v, d) for v in values],
            [False] * (len(values) + 1),
        )

    def rounded_delta(base: Optional[float], value: Optional[float], sign: int) -> Optional[float]:
        # delta rows are differences of the rendered (rounded) percentage rows,
        # so the printed table stays internally consistent at 2 decimals
        if base is None or value is None:
            return None
        delta = sign * (round_half_away(value, d) - round_half_away(base, d))
        return delta + 0.0  # normalize -0.0

    def delta_row(label, stat, base, values, sign):
        deltas = [rounded_delta(base, v, sign) for v in values]
        flags = _flag_best(deltas, _direction(spec, strategy, stat), d)
        return TableRow(label, [""] + [render_value(v, d) for v in deltas], [False] + flags)

    b = result.baseline
    rows = [
        count_row("TP Pixels", b.counts.tp, [c.counts.tp for _, c in cells]),
        pct_row("TP Pixels (%)", b.metrics.tp_pct, [c.metrics.tp_pct for _, c in cells]),
        delta_row("Drop %", "tp_drop", b.metrics.tp_pct, [c.metrics.tp_pct for _, c in cells], -1),
        count_row("FP Pixels", b.counts.fp, [c.counts.fp for _, c in cells]),
        pct_row("FP Pixels (%)", b.metrics.fp_pct, [c.metrics.fp_pct for _, c in cells]),
        delta_row(
            "Increase %", "fp_increase", b.metrics.fp_pct, [c.metrics.fp_pct for _, c in cells], 1
        ),
        count_row("FN Pixels", b.counts.fn, [c.counts.fn for _, c in cells]),
        pct_row("FN Pixels (%)", b.metrics.fn_pct, [c.metrics.fn_pct for _, c in cells]),
        delta_row(
            "Increase %", "fn_increase", b.metrics.fn_pct, [c.metrics.fn_pct for _, c in cells], 1
        ),
    ]
    return Table(
        title=f"Pixel counts, strategy {strategy.value}, threshold {fmt_threshold(threshold)}",
        columns=["XAI/Matrix", MODEL_COLUMN] + methods,
        rows=rows,
    )


def emit_metric_table(
    result: RunResult,
    strategy: StrategyKind,
    threshold: float,
    spec: ReportSpec = ReportSpec(),
) -> Table:
    if result.baseline is None:
        raise ConfigError("metric table requires a baseline result")
    cells = _cells_for(result, strategy, threshold)
    methods = [m for m, _ in cells]
    d = spec.decimals

    def metric_row(label, stat, base_value, values):
        flags = _flag_best(values, _direction(spec, strategy, stat), d)
        return TableRow(
            label,
            [render_value(base_value, d)] + [render_value(v, d) for v in values],
            [False] + flags,
        )

    b = result.baseline.metrics
    rows = [
        metric_row("IoU (Micro)", "iou", b.iou_micro, [c.metrics.iou_micro for _, c in cells]),
        metric_row("Precision", "precision", b.precision, [c.metrics.precision for _, c in cells]),
        metric_row("Recall", "recall", b.recall, [c.metrics.recall for _, c in cells]),
        metric_row("F1", "f1", b.f1, [c.metrics.f1 for _, c in cells]),
    ]
    return Table(
        title=f"Metrics, strategy {strategy.value}, threshold {fmt_threshold(threshold)}",
        columns=["Method", MODEL_COLUMN] + methods,
        rows=rows,
    )


def emit_sweep(
    result: RunResult, spec: ReportSpec = ReportSpec()
) -> dict[tuple[str, float], tuple[Table, Table]]:
    """One (count table, metric table) pair per recorded (strategy, threshold)."""
    pairs: dict[tuple[str, float], tuple[Table, Table]] = {}
    strategies = [StrategyKind.parse(s) for s in result.metadata.get("strategies", [])]
    thresholds = result.metadata.get("thresholds", [])
    for strategy in strategies:
        for threshold in thresholds:
            pairs[(strategy.value, threshold)] = (
                emit_count_table(result, strategy, threshold, spec),
                emit_metric_table(result, strategy, threshold, spec),
            )
    return pairs


# -- renderers ----------------------------------------------------------------


def render_markdown(table: Table) -> str:
    lines = [f"### {table.title}", ""]
    lines.append("| " + " | ".join(table.columns) + " |")
    lines.append("|" + "|".join([" --- "] * len(table.columns)) + "|")
    for row in table.rows:
        rendered = [
            f"**{cell}**" if flag and cell else cell for cell, flag in zip(row.cells, row.flags)
        ]
        lines.append("| " + " | ".join([row.label] + rendered) + " |")
    lines.append("")
    return "\n".join(lines)


def render_table_csv(table: Table) -> str:
    lines = [",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join([row.label] + row.cells))
    return "\n".join(lines) + "\n"


def render_table_json(table: Table) -> dict:
    return {
        "title": table.title,
        "columns": table.columns,
        "rows": [
            {"label": row.label, "cells": row.cells, "flags": row.flags} for row in table.rows
        ],
    }


FLAT_CSV_HEADER = (
    "strategy,threshold,method,tp,fp,fn,tn,tp_pct,fp_pct,fn_pct,"
    "precision,recall,f1,iou,tp_drop_pct,fp_increase_pct,fn_increase_pct"
)


def render_flat_csv(result: RunResult, spec: ReportSpec = ReportSpec()) -> str:
    d = spec.decimals

    def fmt(v: Optional[float]) -> str:
        return "" if v is None else f"{round_half_away(v, d):.{d}f}"

    lines = [FLAT_CSV_HEADER]
    if result.baseline is not None:
        b = result.baseline
        lines.append(
            f"baseline,,model,{b.counts.tp},{b.counts.fp},{b.counts.fn},{b.counts.tn},"
            f"{fmt(b.metrics.tp_pct)},{fmt(b.metrics.fp_pct)},{fmt(b.metrics.fn_pct)},"
            f"{fmt(b.metrics.precision)},{fmt(b.metrics.recall)},{fmt(b.metrics.f1)},"
            f"{fmt(b.metrics.iou_micro)},,,"
        )
    for key in sorted(result.cells, key=lambda k: (k.strategy.value, k.threshold, k.method)):
        cell = result.cells[key]
        c, m, delta = cell.counts, cell.metrics, cell.delta
        lines.append(
            f"{key.strategy.value},{fmt_threshold(key.threshold)},{key.method},"
            f"{c.tp},{c.fp},{c.fn},{c.tn},"
            f"{fmt(m.tp_pct)},{fmt(m.fp_pct)},{fmt(m.fn_pct)},"
            f"{fmt(m.precision)},{fmt(m.recall)},{fmt(m.f1)},{fmt(m.iou_micro)},"
            f"{fmt(delta.tp_drop_pct) if delta else ''},"
            f"{fmt(delta.fp_increase_pct) if delta else ''},"
            f"{fmt(delta.fn_increase_pct) if delta else ''}"
        )
    return "\n".join(lines) + "\n"


def write_reports(
    result: RunResult,
    out_dir: Path,
    spec: ReportSpec,
    thresholds: Optional[list[float]] = None,
) -> list[Path]:
    """Write per-(strategy, threshold) tables in the configured formats.

    When ``thresholds`` is None only the focus threshold is rendered.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    configured = result.metadata.get("thresholds", [])
    if thresholds is None:
        if spec.focus_threshold not in configured:
            raise ConfigError(
                f"focus threshold {fmt_threshold(spec.focus_threshold)} is not in the "
                f"run's thresholds {configured}"
            )
        thresholds = [spec.focus_threshold]
    written: list[Path] = []
    strategies = [StrategyKind.parse(s) for s in result.metadata.get("strategies", [])]
    for strategy in strategies:
        for threshold in thresholds:
            counts = emit_count_table(result, strategy, threshold, spec)
            metrics = emit_metric_table(result, strategy, threshold, spec)
            stem = f"{strategy.value}_t{fmt_threshold(threshold)}"
            if "markdown" in spec.formats:
                path = out_dir / f"{stem}.md"
                path.write_text(render_markdown(counts) + "\n" + render_markdown(metrics))
                written.append(path)
            if "csv" in spec.formats:
                path = out_dir / f"{stem}.csv"
                path.write_text(render_table_csv(counts) + render_table_csv(metrics))
                written.append(path)
            if "json" in spec.formats:
                path = out_dir / f"{stem}.json"
                path.write_text(
                    json.dumps(
                        {
                            "counts": render_table_json(counts),
                            "metrics": render_table_json(metrics),
                        },
                        indent=2,
                        sort_keys=True,
                    )
                    + "\n"
                )
                written.append(path)
    if "csv" in spec.formats:
        path = out_dir / "cells.csv"
        path.write_text(render_flat_csv(result, spec))
        written.append(path)
    if "json" in spec.formats:
        path = out_dir / "run_result_export.json"
        path.write_text(json.dumps(result_to_json(result), indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


def verify_rendered_consistency(result: RunResult, spec: ReportSpec = ReportSpec()) -> None:
    """Check that metrics re-derived from raw counts reproduce emitted metrics."""
    for cell in result.cells.values():
        rederived = metric_set(cell.counts)
        for attr in ("precision", "recall", "f1", "iou_micro", "tp_pct", "fn_pct", "fp_pct"):
            a = getattr(cell.metrics, attr)
            b = getattr(rederived, attr)
            if render_value(a, spec.decimals) != render_value(b, spec.decimals):
                raise AssertionError(f"rendered metric {attr} diverges from raw counts")
