"""Acceptance gate.

Each test exercises one release criterion and reports a single PASS/FAIL line
with its runtime; the lines are echoed in the terminal summary (see the hook
in conftest.py). Tolerances are pinned: rendered metrics within 0.005,
percentage statistics and their differences within 0.01, everything
count-based exact.
"""

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from segxai.metrics import ConfusionCounts, aggregate, confusion, delta_set, metric_set
from segxai.perturb import (
    FillPolicy,
    StrategyKind,
    Threshold,
    apply_visibility,
    threshold_heatmap,
    visible_set,
)
from segxai.pipeline import CellKey, EvaluationManifest, Evaluator
from segxai.raster import BinaryMask, Heatmap, ImageRaster, load_heatmap, load_mask
from segxai.report import emit_count_table, emit_metric_table
from segxai.runner import RunnerSpec

from conftest import make_synthetic_dataset
from table_fixtures import (
    COUNTS,
    EXPECTED,
    METHODS,
    MODEL_COUNTS,
    MODEL_EXPECTED,
    S1_DELTAS,
    counts_with_tn,
    population_consistent_counts,
)
from test_report import fixture_result

METRIC_TOL = 0.005
PCT_TOL = 0.01


# consumed by the pytest_terminal_summary hook in conftest.py
CRITERION_LINES: list[str] = []


def _announce(num: int, name: str, status: str, elapsed: float) -> None:
    line = f"criterion {num} ({name}): {status} [{elapsed:.2f}s]"
    CRITERION_LINES.append(line)
    print(line)


@contextmanager
def criterion(num: int, name: str, limit: float):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < limit, f"runtime {elapsed:.2f}s exceeds {limit}s limit"
    except BaseException:
        _announce(num, name, "FAIL", time.perf_counter() - start)
        raise
    _announce(num, name, "PASS", elapsed)


def test_criterion_1_fixture_arithmetic():
    with criterion(1, "fixture arithmetic", 1.0):
        for strategy in sorted(COUNTS):
            for method in METHODS:
                m = metric_set(counts_with_tn(*COUNTS[strategy][method]))
                want = EXPECTED[strategy][method]
                assert abs(m.precision - want["precision"]) <= METRIC_TOL, (strategy, method)
                assert abs(m.recall - want["recall"]) <= METRIC_TOL, (strategy, method)
                assert abs(m.f1 - want["f1"]) <= METRIC_TOL, (strategy, method)
                assert abs(m.iou_micro - want["iou"]) <= METRIC_TOL, (strategy, method)
                assert abs(m.tp_pct - want["tp_pct"]) <= PCT_TOL, (strategy, method)
                assert abs(m.fn_pct - want["fn_pct"]) <= PCT_TOL, (strategy, method)

        # spot anchors
        model = metric_set(counts_with_tn(*MODEL_COUNTS))
        assert round(model.precision, 2) == 0.94
        assert round(model.recall, 2) == 0.94
        assert round(model.f1, 2) == 0.94
        assert round(model.iou_micro, 2) == 0.89
        score_s2 = metric_set(counts_with_tn(39505, 95918, 13316))
        assert round(score_s2.iou_micro, 2) == 0.27
        assert round(score_s2.precision, 2) == 0.29
        assert round(score_s2.recall, 2) == 0.75
        assert round(score_s2.f1, 2) == 0.42


def test_criterion_2_delta_arithmetic():
    with criterion(2, "delta arithmetic", 1.0):
        baseline = metric_set(counts_with_tn(*MODEL_COUNTS))
        for method in METHODS:
            perturbed = metric_set(population_consistent_counts(*COUNTS["s1"][method]))
            d = delta_set(baseline, perturbed)
            want = S1_DELTAS[method]
            assert abs(d.tp_drop_pct - want["tp_drop"]) <= PCT_TOL, method
            assert abs(d.fp_increase_pct - want["fp_increase"]) <= PCT_TOL, method
            assert abs(d.fn_increase_pct - want["fn_increase"]) <= PCT_TOL, method
            assert d.tp_drop_pct == pytest.approx(d.fn_increase_pct), method
        assert S1_DELTAS["grad-cam"]["fp_increase"] == -0.04


def test_criterion_3_brute_force_oracle():
    with criterion(3, "brute-force oracle equivalence", 10.0):
        rng = np.random.default_rng(11)
        for trial in range(1000):
            h = int(rng.integers(1, 33))
            w = int(rng.integers(1, 33))
            pred = rng.random((h, w)) < rng.random()
            ref = rng.random((h, w)) < rng.random()
            tp = fp = fn = tn = 0
            for y in range(h):
                for x in range(w):
                    if pred[y, x] and ref[y, x]:
                        tp += 1
                    elif pred[y, x]:
                        fp += 1
                    elif ref[y, x]:
                        fn += 1
                    else:
                        tn += 1
            c = confusion(BinaryMask(pred), BinaryMask(ref))
            assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn), trial

            m = metric_set(c)
            assert m.precision == (tp / (tp + fp) if tp + fp else None)
            assert m.recall == (tp / (tp + fn) if tp + fn else None)
            assert m.f1 == (2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else None)
            assert m.iou_micro == (tp / (tp + fp + fn) if tp + fp + fn else None)

            half = confusion(BinaryMask(pred[: h // 2 + 1]), BinaryMask(ref[: h // 2 + 1]))
            rest = confusion(BinaryMask(pred[h // 2 + 1:]), BinaryMask(ref[h // 2 + 1:])) \
                if h // 2 + 1 < h else ConfusionCounts(0, 0, 0, 0)
            assert aggregate([half, rest]) == c, trial


def test_criterion_4_perturbation_properties():
    with criterion(4, "perturbation properties", 10.0):
        rng = np.random.default_rng(12)
        fill = FillPolicy(0)
        for trial in range(500):
            h = int(rng.integers(1, 17))
            w = int(rng.integers(1, 17))
            heat = Heatmap(rng.random((h, w)).astype(np.float32))
            reference = BinaryMask(rng.random((h, w)) < 0.5, "ground-truth")
            img = ImageRaster(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))

            # nested relevance sets across increasing thresholds
            prev = None
            for t in (0.1, 0.3, 0.5, 0.7, 0.9):
                rel = threshold_heatmap(heat, Threshold(t))
                if prev is not None:
                    assert not (rel.bits & ~prev).any(), trial
                prev = rel.bits

            rel = threshold_heatmap(heat, Threshold(0.4))
            s1 = visible_set(StrategyKind.S1_BACKGROUND_ONLY, rel)
            s2 = visible_set(StrategyKind.S2_HIGHLIGHTED_ONLY, rel)
            assert not (s1.bits & s2.bits).any(), trial
            assert (s1.bits | s2.bits).all(), trial

            s3 = visible_set(StrategyKind.S3_XAI_GT, rel, reference)
            assert not (s2.bits & ~s3.bits).any(), trial

            # visibility at threshold zero keeps every highlighted pixel
            rel0 = threshold_heatmap(heat, Threshold(0.0))
            edited = apply_visibility(
                img, visible_set(StrategyKind.S2_HIGHLIGHTED_ONLY, rel0), fill
            )
            assert edited.samples.tobytes() == img.samples.tobytes(), trial


def test_criterion_5_end_to_end(tmp_path):
    with criterion(5, "end-to-end synthetic run", 30.0):
        root = tmp_path / "data"
        ids = make_synthetic_dataset(root, n_images=20, size=32)

        def manifest(out: Path, **kwargs) -> EvaluationManifest:
            defaults = dict(
                dataset_root=root,
                out_dir=out,
                methods=("cam-a", "cam-b"),
                runner=RunnerSpec(mode="builtin", builtin="visibility-prob"),
                prob_dir=root / "probs",
            )
            defaults.update(kwargs)
            return EvaluationManifest(**defaults)

        result = Evaluator(manifest(tmp_path / "run")).run_all()
        assert result.ok
        assert len(result.cells) == 2 * 4 * 4

        gt = {i: load_mask(root / "gt" / f"{i}.png").bits for i in ids}
        prob = {i: load_heatmap(root / "probs" / f"{i}.npy").values for i in ids}
        for key, cell in result.cells.items():
            tp = fp = fn = tn = 0
            for i in ids:
                heat = load_heatmap(root / "heatmaps" / key.method / f"{i}.npy").values
                rel = heat >= np.float32(key.threshold)
                visible = {
                    StrategyKind.S1_BACKGROUND_ONLY: ~rel,
                    StrategyKind.S2_HIGHLIGHTED_ONLY: rel,
                    StrategyKind.S3_XAI_GT: rel | gt[i],
                    StrategyKind.S3_XAI_PM: rel | (prob[i] >= 0.5),
                }[key.strategy]
                pred = (prob[i] >= 0.5) & visible
                tp += int(np.count_nonzero(pred & gt[i]))
                fp += int(np.count_nonzero(pred & ~gt[i]))
                fn += int(np.count_nonzero(~pred & gt[i]))
                tn += int(np.count_nonzero(~pred & ~gt[i]))
            assert cell.counts == ConfusionCounts(tp, fp, fn, tn), key

        # a runner that reproduces the reference leaves nothing to lose
        ident = Evaluator(
            manifest(tmp_path / "ident", runner=RunnerSpec(mode="builtin", builtin="identity-gt"))
        ).run_all()
        assert ident.ok
        for cell in ident.cells.values():
            assert cell.delta.tp_drop_pct == 0.0
            assert cell.delta.fp_increase_pct == 0.0
            assert cell.delta.fn_increase_pct == 0.0

        Evaluator(manifest(tmp_path / "j1", jobs=1)).run_all()
        Evaluator(manifest(tmp_path / "j8", jobs=8)).run_all()
        for name in ("run_result.json", "per_image.csv"):
            a = (tmp_path / "j1" / "results" / name).read_bytes()
            b = (tmp_path / "j8" / "results" / name).read_bytes()
            assert a == b, name


def test_criterion_6_report_fidelity():
    with criterion(6, "report fidelity", 5.0):
        result = fixture_result(("s1",))
        counts = emit_count_table(result, StrategyKind.S1_BACKGROUND_ONLY, 0.4)
        metrics = emit_metric_table(result, StrategyKind.S1_BACKGROUND_ONLY, 0.4)

        def row(table, label, occurrence=0):
            return [r for r in table.rows if r.label == label][occurrence]

        assert row(counts, "TP Pixels (%)").cells == [
            "93.58", "85.68", "75.12", "85.64", "49.05", "88.96", "85.62",
        ]
        assert row(counts, "Drop %").cells[1:] == [
            "7.90", "18.46", "7.94", "44.53", "4.62", "7.96",
        ]
        assert row(counts, "Increase %", 0).cells[1:] == [
            "-0.04", "0.66", "-0.02", "0.46", "1.31", "0.10",
        ]
        assert row(metrics, "IoU (Micro)").cells == [
            "0.89", "0.81", "0.69", "0.81", "0.46", "0.80", "0.81",
        ]
        assert row(metrics, "Precision").cells == [
            "0.94", "0.94", "0.90", "0.94", "0.87", "0.89", "0.94",
        ]

        def flagged(r):
            return [m for m, f in zip(counts.columns[2:], r.flags[1:]) if f]

        drop = row(counts, "Drop %")
        assert flagged(drop) == ["score-cam"]
        assert drop.cells[4] == "44.53"
        fp_inc = row(counts, "Increase %", 0)
        assert flagged(fp_inc) == ["eigen-cam"]
        assert fp_inc.cells[5] == "1.31"
