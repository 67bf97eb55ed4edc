"""Evaluation pipeline: baseline inference, per-cell perturbation and
re-inference, metric aggregation, caching, and result persistence.

A "cell" is one (method, threshold, strategy) combination. Cell failures are
isolated: a crashing runner on one cell never invalidates sibling cells.
Persisted results are byte-identical regardless of the worker count.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from segxai.metrics import (
    ConfusionCounts,
    DeltaSet,
    MetricSet,
    aggregate,
    confusion,
    delta_set,
    metric_set,
)
from segxai.perturb import (
    FillPolicy,
    StrategyKind,
    Threshold,
    apply_visibility,
    threshold_heatmap,
    visible_set,
)
from segxai.raster import BinaryMask, load_heatmap, load_image, load_mask, store_image, store_mask
from segxai.runner import (
    BatchEntry,
    BatchManifest,
    IdentityGtRunner,
    PrecomputedRunner,
    Runner,
    RunnerSpec,
    SubprocessRunner,
    VisibilityProbRunner,
    run_batch,
)

DEFAULT_THRESHOLDS = (0.2, 0.4, 0.6, 0.8)

RESULT_SCHEMA = 1


class ConfigError(ValueError):
    """Invalid manifest or dataset layout (CLI exit code 2)."""


class PipelineError(RuntimeError):
    """Evaluation-time failure (CLI exit code 1)."""


def fmt_threshold(t: float) -> str:
    return f"{t:g}"


@dataclass(frozen=True)
class EvaluationManifest:
    dataset_root: Path
    out_dir: Path
    methods: tuple[str, ...]
    runner: RunnerSpec
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    strategies: tuple[StrategyKind, ...] = tuple(StrategyKind)
    s3_mode: str = "rerun"
    fill: FillPolicy = FillPolicy(0)
    cache: bool = True
    jobs: int = 1
    target_class: str = "building"
    # probability maps for the visibility-prob builtin runner
    prob_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.s3_mode not in ("rerun", "mask"):
            raise ConfigError(f"s3 mode must be 'rerun' or 'mask', got {self.s3_mode!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        for t in self.thresholds:
            if not (0.0 <= t <= 1.0):
                raise ConfigError(f"threshold out of range [0, 1]: {t}")
        if list(self.thresholds) != sorted(set(self.thresholds)):
            raise ConfigError(f"thresholds must be strictly increasing: {list(self.thresholds)}")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("duplicate strategies configured")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path = Path(".")) -> "EvaluationManifest":
        def resolve(p: str) -> Path:
            path = Path(p)
            return path if path.is_absolute() else base_dir / path

        try:
            runner_d = dict(d["runner"])
            spec = RunnerSpec(
                mode=runner_d["mode"],
                command=tuple(runner_d["command"]) if runner_d.get("command") else None,
                pred_dir=resolve(runner_d["pred_dir"]) if runner_d.get("pred_dir") else None,
                builtin=runner_d.get("builtin"),
                timeout=float(runner_d.get("timeout", 600.0)),
                reentrant=bool(runner_d.get("reentrant", False)),
            )
            return cls(
                dataset_root=resolve(d["dataset_root"]),
                out_dir=resolve(d["out_dir"]),
                methods=tuple(d["methods"]),
                runner=spec,
                thresholds=tuple(float(t) for t in d.get("thresholds", DEFAULT_THRESHOLDS)),
                strategies=tuple(
                    StrategyKind.parse(s)
                    for s in d.get("strategies", [s.value for s in StrategyKind])
                ),
                s3_mode=d.get("s3_mode", "rerun"),
                fill=FillPolicy(int(d.get("fill", 0))),
                cache=bool(d.get("cache", True)),
                jobs=int(d.get("jobs", 1)),
                target_class=d.get("target_class", "building"),
                prob_dir=resolve(d["prob_dir"]) if d.get("prob_dir") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid evaluation manifest: {exc}") from exc

    @classmethod
    def from_json(cls, path: Path) -> "EvaluationManifest":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"no such manifest file: {path}")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest is not valid JSON: {path}: {exc}") from exc
        return cls.from_dict(d, base_dir=path.parent)

    def content_hash(self) -> str:
        payload = {
            "dataset_root": str(self.dataset_root),
            "methods": list(self.methods),
            "thresholds": list(self.thresholds),
            "strategies": [s.value for s in self.strategies],
            "s3_mode": self.s3_mode,
            "fill": self.fill.sample,
            "runner": self.runner.identity,
            "target_class": self.target_class,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class Dataset:
    """Resolved dataset layout: images/, gt/, heatmaps/<method>/, optional pred/."""

    root: Path
    ids: tuple[str, ...]
    heatmap_paths: dict[str, dict[str, Path]]  # method -> id -> path

    @classmethod
    def discover(cls, manifest: EvaluationManifest) -> "Dataset":
        root = manifest.dataset_root
        images_dir = root / "images"
        gt_dir = root / "gt"
        if not images_dir.is_dir():
            raise ConfigError(f"missing dataset directory: {images_dir}")
        if not gt_dir.is_dir():
            raise ConfigError(f"missing dataset directory: {gt_dir}")
        ids = tuple(sorted(p.stem for p in images_dir.glob("*.png")))
        if not ids:
            raise ConfigError(f"no images found under {images_dir}")
        for image_id in ids:
            if not (gt_dir / f"{image_id}.png").is_file():
                raise ConfigError(f"missing ground-truth mask for image {image_id!r}")
        heatmap_paths: dict[str, dict[str, Path]] = {}
        for method in manifest.methods:
            method_dir = root / "heatmaps" / method
            if not method_dir.is_dir():
                raise ConfigError(f"missing heatmap directory for method {method!r}: {method_dir}")
            per_id = {}
            for image_id in ids:
                npy = method_dir / f"{image_id}.npy"
                png = method_dir / f"{image_id}.png"
                if npy.is_file():
                    per_id[image_id] = npy
                elif png.is_file():
                    per_id[image_id] = png
                else:
                    raise ConfigError(f"missing heatmap for method {method!r}, image {image_id!r}")
            heatmap_paths[method] = per_id
        return cls(root=root, ids=ids, heatmap_paths=heatmap_paths)

    def image_path(self, image_id: str) -> Path:
        return self.root / "images" / f"{image_id}.png"

    def gt_path(self, image_id: str) -> Path:
        return self.root / "gt" / f"{image_id}.png"

    def heatmap_path(self, method: str, image_id: str) -> Path:
        return self.heatmap_paths[method][image_id]


@dataclass(frozen=True)
class CellKey:
    method: str
    threshold: float
    strategy: StrategyKind

    def as_tuple(self) -> tuple[str, float, str]:
        return (self.method, self.threshold, self.strategy.value)


@dataclass
class CellResult:
    key: CellKey
    counts: ConfusionCounts
    metrics: MetricSet
    delta: Optional[DeltaSet]
    per_image: dict[str, ConfusionCounts]


@dataclass
class CellFailure:
    key: CellKey
    error: str


@dataclass
class BaselineResult:
    counts: ConfusionCounts
    metrics: MetricSet
    per_image: dict[str, ConfusionCounts]


@dataclass
class RunResult:
    baseline: Optional[BaselineResult]
    cells: dict[CellKey, CellResult]
    failures: list[CellFailure]
    metadata: dict

    @property
    def ok(self) -> bool:
        return not self.failures


def build_runner(spec: RunnerSpec, context: "RunContext") -> Runner:
    if spec.mode == "subprocess":
        return SubprocessRunner(spec.command, spec.timeout)
    if spec.mode == "precomputed":
        return PrecomputedRunner(spec.pred_dir)
    if spec.builtin == "identity-gt":
        return IdentityGtRunner(context.gt)
    return VisibilityProbRunner(context.probs, context.fill)


@dataclass
class RunContext:
    """Shared per-run state handed to builtin runners."""

    gt: dict[str, BinaryMask]
    probs: dict[str, "object"]
    fill: FillPolicy


class Cache:
    """Content-addressed JSON cache for per-cell confusion counts."""

    def __init__(self, root: Path, enabled: bool):
        self.root = root
        self.enabled = enabled
        if enabled:
            self.root.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        if not self.enabled:
            return None
        p = self.path(key)
        if not p.is_file():
            return None
        try:
            return json.loads(p.read_text())
        except (json.JSONDecodeError, OSError):
            return None

    def put(self, key: str, payload: dict) -> None:
        if not self.enabled:
            return
        self.path(key).write_text(json.dumps(payload, sort_keys=True))


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _counts_to_json(c: ConfusionCounts) -> dict:
    return {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}


def _counts_from_json(d: dict) -> ConfusionCounts:
    return ConfusionCounts(d["tp"], d["fp"], d["fn"], d["tn"])


class Evaluator:
    """Executes one evaluation run described by an EvaluationManifest."""

    def __init__(self, manifest: EvaluationManifest):
        self.manifest = manifest
        self.dataset = Dataset.discover(manifest)
        self.out_dir = manifest.out_dir
        self.cache = Cache(self.out_dir / "cache", manifest.cache)
        self.runner_invocations = 0
        self._gt = {
            image_id: load_mask(self.dataset.gt_path(image_id), "ground-truth")
            for image_id in self.dataset.ids
        }
        self._images = {image_id: load_image(self.dataset.image_path(image_id)) for image_id in self.dataset.ids}
        for image_id in self.dataset.ids:
            if self._gt[image_id].shape != self._images[image_id].shape:
                raise ConfigError(
                    f"ground-truth mask shape {self._gt[image_id].shape} does not match "
                    f"image shape {self._images[image_id].shape} for image {image_id!r}"
                )
        self.context = RunContext(gt=self._gt, probs={}, fill=manifest.fill)
        self.runner = build_runner(manifest.runner, self.context)
        self._baseline_preds: dict[str, BinaryMask] = {}
        if manifest.runner.mode == "builtin" and manifest.runner.builtin == "visibility-prob":
            if manifest.prob_dir is not None:
                self.register_probs_from_dir(manifest.prob_dir)

    # -- helpers -------------------------------------------------------------

    def register_prob(self, image_id: str, prob) -> None:
        """Register a probability map for the visibility-prob builtin runner."""
        self.context.probs[image_id] = prob

    def register_probs_from_dir(self, prob_dir: Path) -> None:
        for image_id in self.dataset.ids:
            npy = prob_dir / f"{image_id}.npy"
            png = prob_dir / f"{image_id}.png"
            path = npy if npy.is_file() else png
            if not path.is_file():
                raise ConfigError(f"missing probability map for image {image_id!r} in {prob_dir}")
            self.register_prob(image_id, load_heatmap(path))

    def _expected_shapes(self) -> dict[str, tuple[int, int]]:
        return {image_id: self._images[image_id].shape for image_id in self.dataset.ids}

    def _pmap(self, fn, items):
        """Order-preserving map, parallel when jobs > 1."""
        if self.manifest.jobs <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with concurrent.futures.ThreadPoolExecutor(max_workers=self.manifest.jobs) as pool:
            return list(pool.map(fn, items))

    # -- baseline ------------------------------------------------------------

    def _baseline_cache_key(self) -> str:
        h = hashlib.sha256()
        h.update(b"baseline")
        h.update(self.manifest.runner.identity.encode())
        for image_id in self.dataset.ids:
            h.update(image_id.encode())
            h.update(_file_digest(self.dataset.image_path(image_id)).encode())
            h.update(_file_digest(self.dataset.gt_path(image_id)).encode())
        return h.hexdigest()

    def run_baseline(self) -> BaselineResult:
        key = self._baseline_cache_key()
        pred_dir = self.out_dir / "pred" / "baseline"
        cached = self.cache.get(key)
        if cached is not None:
            preds = self._load_persisted_preds(pred_dir)
            if preds is not None:
                self._baseline_preds = preds
                per_image = {i: _counts_from_json(c) for i, c in cached["per_image"].items()}
                return self._assemble_baseline(per_image)

        batch = BatchManifest(
            entries=tuple(
                BatchEntry(image_id, self.dataset.image_path(image_id))
                for image_id in self.dataset.ids
            ),
            target_class=self.manifest.target_class,
        )
        self.runner_invocations += 1
        preds = run_batch(self.runner, batch, pred_dir, self._expected_shapes())
        for image_id in self.dataset.ids:
            store_mask(preds[image_id], pred_dir / f"{image_id}.png")
        self._baseline_preds = preds
        per_image = {
            image_id: confusion(preds[image_id], self._gt[image_id])
            for image_id in self.dataset.ids
        }
        self.cache.put(key, {"per_image": {i: _counts_to_json(c) for i, c in per_image.items()}})
        return self._assemble_baseline(per_image)

    def _assemble_baseline(self, per_image: dict[str, ConfusionCounts]) -> BaselineResult:
        total = aggregate([per_image[i] for i in self.dataset.ids])
        return BaselineResult(counts=total, metrics=metric_set(total), per_image=per_image)

    def _load_persisted_preds(self, pred_dir: Path) -> Optional[dict[str, BinaryMask]]:
        preds = {}
        for image_id in self.dataset.ids:
            p = pred_dir / f"{image_id}.png"
            if not p.is_file():
                return None
            preds[image_id] = load_mask(p, "prediction")
        return preds

    # -- cells ---------------------------------------------------------------

    def _cell_cache_key(self, key: CellKey) -> str:
        h = hashlib.sha256()
        h.update(b"cell")
        h.update(self.manifest.runner.identity.encode())
        h.update(repr(key.threshold).encode())
        h.update(key.strategy.value.encode())
        h.update(str(self.manifest.fill.sample).encode())
        h.update(self.manifest.s3_mode.encode())
        for image_id in self.dataset.ids:
            h.update(image_id.encode())
            h.update(_file_digest(self.dataset.image_path(image_id)).encode())
            h.update(_file_digest(self.dataset.gt_path(image_id)).encode())
            h.update(_file_digest(self.dataset.heatmap_path(key.method, image_id)).encode())
        return h.hexdigest()

    def _relevance(self, key: CellKey, image_id: str) -> BinaryMask:
        h = load_heatmap(self.dataset.heatmap_path(key.method, image_id), key.method)
        img = self._images[image_id]
        if h.shape != img.shape:
            raise PipelineError(
                f"heatmap shape {h.shape} does not match image shape {img.shape} "
                f"(method {key.method!r}, image {image_id!r})"
            )
        return threshold_heatmap(h, Threshold(key.threshold))

    def _reference_for(self, strategy: StrategyKind, image_id: str) -> Optional[BinaryMask]:
        if strategy is StrategyKind.S3_XAI_GT:
            return self._gt[image_id]
        if strategy is StrategyKind.S3_XAI_PM:
            if image_id not in self._baseline_preds:
                raise PipelineError("baseline predictions required for s3pm but not computed")
            return self._baseline_preds[image_id]
        return None

    def run_cell(self, key: CellKey, baseline: Optional[BaselineResult]) -> CellResult:
        cache_key = self._cell_cache_key(key)
        cached = self.cache.get(cache_key)
        if cached is not None:
            per_image = {i: _counts_from_json(c) for i, c in cached["per_image"].items()}
            return self._assemble_cell(key, per_image, baseline)

        use_mask_mode = self.manifest.s3_mode == "mask" and key.strategy.requires_reference
        try:
            if use_mask_mode:
                per_image = self._run_cell_mask_mode(key)
            else:
                per_image = self._run_cell_rerun(key)
        except (PipelineError, ConfigError):
            raise
        except Exception as exc:
            raise PipelineError(
                f"cell (method={key.method}, threshold={fmt_threshold(key.threshold)}, "
                f"strategy={key.strategy.value}) failed: {exc}"
            ) from exc
        self.cache.put(
            cache_key, {"per_image": {i: _counts_to_json(c) for i, c in per_image.items()}}
        )
        return self._assemble_cell(key, per_image, baseline)

    def _run_cell_mask_mode(self, key: CellKey) -> dict[str, ConfusionCounts]:
        def one(image_id: str) -> ConfusionCounts:
            relevance = self._relevance(key, image_id)
            reference = self._reference_for(key.strategy, image_id)
            return confusion(relevance.with_role("prediction"), reference)

        results = self._pmap(one, list(self.dataset.ids))
        return dict(zip(self.dataset.ids, results))

    def _run_cell_rerun(self, key: CellKey) -> dict[str, ConfusionCounts]:
        t_dir = fmt_threshold(key.threshold)
        edited_dir = self.out_dir / "edited" / key.method / t_dir / key.strategy.value
        pred_dir = self.out_dir / "pred" / key.method / t_dir / key.strategy.value

        def edit(image_id: str) -> Path:
            relevance = self._relevance(key, image_id)
            reference = self._reference_for(key.strategy, image_id)
            vis = visible_set(key.strategy, relevance, reference)
            edited = apply_visibility(self._images[image_id], vis, self.manifest.fill)
            path = edited_dir / f"{image_id}.png"
            store_image(edited, path)
            return path

        edited_paths = self._pmap(edit, list(self.dataset.ids))
        batch = BatchManifest(
            entries=tuple(
                BatchEntry(image_id, path)
                for image_id, path in zip(self.dataset.ids, edited_paths)
            ),
            target_class=self.manifest.target_class,
        )
        self.runner_invocations += 1
        preds = run_batch(self.runner, batch, pred_dir, self._expected_shapes())
        for image_id in self.dataset.ids:
            store_mask(preds[image_id], pred_dir / f"{image_id}.png")
        return {
            image_id: confusion(preds[image_id], self._gt[image_id])
            for image_id in self.dataset.ids
        }

    def _assemble_cell(
        self,
        key: CellKey,
        per_image: dict[str, ConfusionCounts],
        baseline: Optional[BaselineResult],
    ) -> CellResult:
        total = aggregate([per_image[i] for i in self.dataset.ids])
        metrics = metric_set(total)
        delta = None
        if baseline is not None:
            try:
                delta = delta_set(baseline.metrics, metrics)
            except ValueError:
                # mask-vs-reference against the PM population is not comparable
                # to the GT-based baseline; the delta is simply not defined.
                delta = None
        return CellResult(key=key, counts=total, metrics=metrics, delta=delta, per_image=per_image)

    # -- full run ------------------------------------------------------------

    def run_all(self) -> RunResult:
        if not self.manifest.methods:
            raise ConfigError("no methods configured")
        baseline = self.run_baseline()
        cells: dict[CellKey, CellResult] = {}
        failures: list[CellFailure] = []
        for method in self.manifest.methods:
            for t in self.manifest.thresholds:
                for strategy in self.manifest.strategies:
                    key = CellKey(method, t, strategy)
                    try:
                        cells[key] = self.run_cell(key, baseline)
                    except Exception as exc:
                        failures.append(CellFailure(key, str(exc)))
        metadata = {
            "schema": RESULT_SCHEMA,
            "fill": self.manifest.fill.sample,
            "s3_mode": self.manifest.s3_mode,
            "runner": self.manifest.runner.identity,
            "manifest_hash": self.manifest.content_hash(),
            "target_class": self.manifest.target_class,
            "thresholds": list(self.manifest.thresholds),
            "strategies": [s.value for s in self.manifest.strategies],
            "methods": list(self.manifest.methods),
        }
        result = RunResult(baseline=baseline, cells=cells, failures=failures, metadata=metadata)
        persist_result(result, self.out_dir / "results")
        return result


def run_all(manifest: EvaluationManifest) -> RunResult:
    return Evaluator(manifest).run_all()


# -- persistence --------------------------------------------------------------


def _metrics_to_json(m: MetricSet) -> dict:
    return {
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "iou_micro": m.iou_micro,
        "tp_pct": m.tp_pct,
        "fn_pct": m.fn_pct,
        "fp_pct": m.fp_pct,
        "ref_positive": m.ref_positive,
        "ref_negative": m.ref_negative,
    }


def _metrics_from_json(d: dict) -> MetricSet:
    return MetricSet(
        precision=d["precision"],
        recall=d["recall"],
        f1=d["f1"],
        iou_micro=d["iou_micro"],
        tp_pct=d["tp_pct"],
        fn_pct=d["fn_pct"],
        fp_pct=d["fp_pct"],
        ref_positive=d["ref_positive"],
        ref_negative=d["ref_negative"],
    )


def _delta_to_json(d: Optional[DeltaSet]) -> Optional[dict]:
    if d is None:
        return None
    return {
        "tp_drop_pct": d.tp_drop_pct,
        "fp_increase_pct": d.fp_increase_pct,
        "fn_increase_pct": d.fn_increase_pct,
    }


def _delta_from_json(d: Optional[dict]) -> Optional[DeltaSet]:
    if d is None:
        return None
    return DeltaSet(d["tp_drop_pct"], d["fp_increase_pct"], d["fn_increase_pct"])


def result_to_json(result: RunResult) -> dict:
    cells = []
    for key in sorted(result.cells, key=lambda k: (k.method, k.threshold, k.strategy.value)):
        cell = result.cells[key]
        cells.append(
            {
                "method": key.method,
                "threshold": key.threshold,
                "strategy": key.strategy.value,
                "counts": _counts_to_json(cell.counts),
                "metrics": _metrics_to_json(cell.metrics),
                "delta": _delta_to_json(cell.delta),
                "per_image": {
                    i: _counts_to_json(c) for i, c in sorted(cell.per_image.items())
                },
            }
        )
    baseline = None
    if result.baseline is not None:
        baseline = {
            "counts": _counts_to_json(result.baseline.counts),
            "metrics": _metrics_to_json(result.baseline.metrics),
            "per_image": {
                i: _counts_to_json(c) for i, c in sorted(result.baseline.per_image.items())
            },
        }
    return {
        "schema": RESULT_SCHEMA,
        "metadata": result.metadata,
        "baseline": baseline,
        "cells": cells,
        "failures": [
            {
                "method": f.key.method,
                "threshold": f.key.threshold,
                "strategy": f.key.strategy.value,
                "error": f.error,
            }
            for f in result.failures
        ],
    }


def result_from_json(d: dict) -> RunResult:
    if d.get("schema") != RESULT_SCHEMA:
        raise ConfigError(f"unsupported result schema {d.get('schema')!r} (expected {RESULT_SCHEMA})")
    baseline = None
    if d.get("baseline") is not None:
        b = d["baseline"]
        baseline = BaselineResult(
            counts=_counts_from_json(b["counts"]),
            metrics=_metrics_from_json(b["metrics"]),
            per_image={i: _counts_from_json(c) for i, c in b["per_image"].items()},
        )
    cells = {}
    for c in d["cells"]:
        key = CellKey(c["method"], c["threshold"], StrategyKind.parse(c["strategy"]))
        cells[key] = CellResult(
            key=key,
            counts=_counts_from_json(c["counts"]),
            metrics=_metrics_from_json(c["metrics"]),
            delta=_delta_from_json(c.get("delta")),
            per_image={i: _counts_from_json(x) for i, x in c["per_image"].items()},
        )
    failures = [
        CellFailure(
            CellKey(f["method"], f["threshold"], StrategyKind.parse(f["strategy"])), f["error"]
        )
        for f in d.get("failures", [])
    ]
    return RunResult(baseline=baseline, cells=cells, failures=failures, metadata=d["metadata"])


def persist_result(result: RunResult, results_dir: Path) -> None:
    results_dir.mkdir(parents=True, exist_ok=True)
    blob = json.dumps(result_to_json(result), sort_keys=True, indent=2)
    (results_dir / "run_result.json").write_text(blob + "\n")

    lines = ["strategy,threshold,method,image_id,tp,fp,fn,tn"]
    if result.baseline is not None:
        for image_id in sorted(result.baseline.per_image):
            c = result.baseline.per_image[image_id]
            lines.append(f"baseline,,model,{image_id},{c.tp},{c.fp},{c.fn},{c.tn}")
    for key in sorted(result.cells, key=lambda k: (k.strategy.value, k.threshold, k.method)):
        cell = result.cells[key]
        for image_id in sorted(cell.per_image):
            c = cell.per_image[image_id]
            lines.append(
                f"{key.strategy.value},{fmt_threshold(key.threshold)},{key.method},"
                f"{image_id},{c.tp},{c.fp},{c.fn},{c.tn}"
            )
    (results_dir / "per_image.csv").write_text("\n".join(lines) + "\n")

    # volatile metadata lives outside the deterministic result files
    (results_dir / "run_log.json").write_text(
        json.dumps({"completed_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}) + "\n"
    )


def load_result(results_dir: Path) -> RunResult:
    path = Path(results_dir) / "run_result.json"
    if not path.is_file():
        raise ConfigError(f"no persisted results at {path}")
    return result_from_json(json.loads(path.read_text()))
