import json

import pytest

from segxai.metrics import delta_set, metric_set
from segxai.pipeline import (
    BaselineResult,
    CellKey,
    CellResult,
    ConfigError,
    RunResult,
    result_from_json,
    result_to_json,
)
from segxai.perturb import StrategyKind
from segxai.report import (
    ReportSpec,
    emit_count_table,
    emit_metric_table,
    emit_sweep,
    render_flat_csv,
    render_markdown,
    render_table_csv,
    render_value,
    round_half_away,
    verify_rendered_consistency,
    write_reports,
)

from table_fixtures import (
    COUNTS,
    EXPECTED,
    METHODS,
    MODEL_COUNTS,
    MODEL_EXPECTED,
    S1_FP_PCT,
    counts_with_tn,
    population_consistent_counts,
)

import dataclasses


def fixture_result(strategies=("s1",), threshold=0.4, published_pcts=True) -> RunResult:
    """RunResult assembled from the published fixture counts.

    With ``published_pcts`` the percentage statistics are injected as printed
    (one s1 column's printed percentages disagree with its own counts in the
    last rendered digit).
    """
    baseline_counts = counts_with_tn(*MODEL_COUNTS)
    baseline_metrics = metric_set(baseline_counts)
    if published_pcts:
        baseline_metrics = dataclasses.replace(
            baseline_metrics,
            tp_pct=MODEL_EXPECTED["tp_pct"],
            fn_pct=MODEL_EXPECTED["fn_pct"],
            fp_pct=MODEL_EXPECTED["fp_pct"],
        )
    baseline = BaselineResult(
        counts=baseline_counts,
        metrics=baseline_metrics,
        per_image={"all": baseline_counts},
    )
    cells = {}
    for strategy in strategies:
        for method in METHODS:
            counts = population_consistent_counts(*COUNTS[strategy][method])
            metrics = metric_set(counts)
            if published_pcts:
                overrides = {
                    "tp_pct": EXPECTED[strategy][method]["tp_pct"],
                    "fn_pct": EXPECTED[strategy][method]["fn_pct"],
                }
                if strategy == "s1":
                    overrides["fp_pct"] = S1_FP_PCT[method]
                metrics = dataclasses.replace(metrics, **overrides)
            key = CellKey(method, threshold, StrategyKind.parse(strategy))
            cells[key] = CellResult(
                key=key,
                counts=counts,
                metrics=metrics,
                delta=delta_set(baseline.metrics, metrics),
                per_image={"all": counts},
            )
    return RunResult(
        baseline=baseline,
        cells=cells,
        failures=[],
        metadata={
            "schema": 1,
            "methods": list(METHODS),
            "thresholds": [threshold],
            "strategies": list(strategies),
            "fill": 0,
            "s3_mode": "rerun",
            "runner": "fixture",
            "manifest_hash": "fixture",
        },
    )


def row(table, label, occurrence=0):
    rows = [r for r in table.rows if r.label == label]
    return rows[occurrence]


def test_round_half_away():
    assert round_half_away(0.445, 2) == 0.45
    assert round_half_away(-0.045, 2) == -0.05
    assert round_half_away(0.4449, 2) == 0.44
    assert render_value(None, 2) == "—"
    assert render_value(0.935821, 2) == "0.94"


def test_count_table_tp_pct_row():
    table = emit_count_table(fixture_result(), StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    assert table.columns == ["XAI/Matrix", "Model"] + list(METHODS)
    assert row(table, "TP Pixels (%)").cells == [
        "93.58", "85.68", "75.12", "85.64", "49.05", "88.96", "85.62",
    ]


def test_count_table_counts_and_blanks():
    table = emit_count_table(fixture_result(), StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    assert row(table, "TP Pixels").cells[0] == "49431"
    assert row(table, "FP Pixels").cells[4] == "3846"
    # the Model column has no drop/increase entries
    assert row(table, "Drop %").cells[0] == ""
    assert row(table, "Increase %", 0).cells[0] == ""
    assert row(table, "Increase %", 1).cells[0] == ""


def test_count_table_delta_rows_verbatim():
    table = emit_count_table(fixture_result(), StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    assert row(table, "Drop %").cells[1:] == ["7.90", "18.46", "7.94", "44.53", "4.62", "7.96"]
    assert row(table, "Increase %", 0).cells[1:] == [
        "-0.04", "0.66", "-0.02", "0.46", "1.31", "0.10",
    ]
    assert row(table, "Increase %", 1).cells[1:] == [
        "7.90", "18.46", "7.94", "44.53", "4.62", "7.96",
    ]


def test_count_table_fp_pct_row():
    table = emit_count_table(fixture_result(), StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    want = ["1.38"] + [f"{S1_FP_PCT[m]:.2f}" for m in METHODS]
    assert row(table, "FP Pixels (%)").cells == want


def test_count_table_best_flags():
    table = emit_count_table(fixture_result(), StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    drop = row(table, "Drop %")
    methods_flagged = [m for m, f in zip(table.columns[2:], drop.flags[1:]) if f]
    assert methods_flagged == ["score-cam"]
    fp_inc = row(table, "Increase %", 0)
    assert [m for m, f in zip(table.columns[2:], fp_inc.flags[1:]) if f] == ["eigen-cam"]


def test_metric_table_values_verbatim():
    table = emit_metric_table(fixture_result(), StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    assert row(table, "IoU (Micro)").cells == [
        "0.89", "0.81", "0.69", "0.81", "0.46", "0.80", "0.81",
    ]
    assert row(table, "Precision").cells == [
        "0.94", "0.94", "0.90", "0.94", "0.87", "0.89", "0.94",
    ]
    assert row(table, "Recall").cells == ["0.94", "0.86", "0.75", "0.86", "0.49", "0.89", "0.86"]
    assert row(table, "F1").cells == ["0.94", "0.90", "0.82", "0.90", "0.63", "0.89", "0.89"]


def test_metric_table_s3gt_precision_tie():
    table = emit_metric_table(fixture_result(("s3gt",)), StrategyKind.S3_XAI_GT, 0.4)
    precision = row(table, "Precision")
    flagged = [m for m, f in zip(table.columns[2:], precision.flags[1:]) if f]
    # score-cam and eigen-cam tie at the rendered precision
    assert flagged == ["score-cam", "eigen-cam"]
    assert precision.cells[4] == precision.cells[5] == "0.36"


def test_all_identical_metrics_all_flagged():
    result = fixture_result()
    # overwrite every method with the same counts
    base_key = CellKey(METHODS[0], 0.4, StrategyKind.S1_BACKGROUND_ONLY)
    template = result.cells[base_key]
    for key in list(result.cells):
        result.cells[key] = CellResult(
            key=key,
            counts=template.counts,
            metrics=template.metrics,
            delta=template.delta,
            per_image=template.per_image,
        )
    table = emit_metric_table(result, StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    assert all(row(table, "IoU (Micro)").flags[1:])


def test_single_method_table():
    result = fixture_result()
    result.metadata["methods"] = ["grad-cam"]
    table = emit_count_table(result, StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    assert table.columns == ["XAI/Matrix", "Model", "grad-cam"]


def test_missing_cell_error():
    result = fixture_result()
    with pytest.raises(ConfigError, match="missing result cell"):
        emit_count_table(result, StrategyKind.S2_HIGHLIGHTED_ONLY, 0.4)


def test_emit_sweep_arity():
    result = fixture_result(("s1", "s2", "s3gt", "s3pm"))
    pairs = emit_sweep(result)
    assert len(pairs) == 4
    for counts, metrics in pairs.values():
        assert len(counts.rows) == 9
        assert len(metrics.rows) == 4


def test_flags_invariant_under_column_permutation():
    result = fixture_result()
    table = emit_count_table(result, StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    flagged = {
        (r.label, table.columns[i + 1])
        for r in table.rows
        for i, f in enumerate(r.flags)
        if f
    }
    permuted = fixture_result()
    permuted.metadata["methods"] = list(reversed(METHODS))
    ptable = emit_count_table(permuted, StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    pflagged = {
        (r.label, ptable.columns[i + 1])
        for r in ptable.rows
        for i, f in enumerate(r.flags)
        if f
    }
    assert flagged == pflagged


def test_markdown_rendering():
    table = emit_count_table(fixture_result(), StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    md = render_markdown(table)
    assert "**44.53**" in md
    assert md.count("|") > 20


def test_csv_and_markdown_same_numbers():
    table = emit_metric_table(fixture_result(), StrategyKind.S1_BACKGROUND_ONLY, 0.4)
    csv_text = render_table_csv(table)
    md_text = render_markdown(table)
    for cell in ("0.89", "0.46", "0.63"):
        assert cell in csv_text
        assert cell in md_text


def test_flat_csv_header_and_rows():
    result = fixture_result()
    text = render_flat_csv(result)
    lines = text.strip().split("\n")
    assert lines[0] == (
        "strategy,threshold,method,tp,fp,fn,tn,tp_pct,fp_pct,fn_pct,"
        "precision,recall,f1,iou,tp_drop_pct,fp_increase_pct,fn_increase_pct"
    )
    assert len(lines) == 1 + 1 + len(METHODS)
    assert any(line.startswith("s1,0.4,score-cam,25906,3846,") for line in lines)


def test_json_export_round_trip():
    result = fixture_result(("s1", "s2"))
    blob = json.dumps(result_to_json(result), sort_keys=True)
    again = result_from_json(json.loads(blob))
    assert result_to_json(again) == result_to_json(result)


def test_rendered_consistency():
    verify_rendered_consistency(fixture_result(("s1", "s2", "s3gt", "s3pm"), published_pcts=False))


def test_write_reports_markdown(tmp_path):
    result = fixture_result(("s1",))
    spec = ReportSpec(formats=("markdown", "csv", "json"))
    written = write_reports(result, tmp_path, spec)
    names = {p.name for p in written}
    assert "s1_t0.4.md" in names
    assert "s1_t0.4.csv" in names
    assert "cells.csv" in names
    assert "run_result_export.json" in names


def test_write_reports_deterministic(tmp_path):
    result = fixture_result(("s1",))
    spec = ReportSpec(formats=("markdown",))
    write_reports(result, tmp_path / "a", spec)
    write_reports(result, tmp_path / "b", spec)
    assert (tmp_path / "a" / "s1_t0.4.md").read_bytes() == (tmp_path / "b" / "s1_t0.4.md").read_bytes()


def test_focus_threshold_must_be_configured(tmp_path):
    result = fixture_result(("s1",))
    spec = ReportSpec(focus_threshold=0.5)
    with pytest.raises(ConfigError, match="focus threshold"):
        write_reports(result, tmp_path, spec)


def test_report_spec_rejects_unknown_format():
    with pytest.raises(ConfigError, match="unknown report format"):
        ReportSpec(formats=("yaml",))
