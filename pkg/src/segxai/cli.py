"""Command-line front end.

Exit codes: 0 success, 1 partial/evaluation failure, 2 configuration or
usage error. Configuration precedence: CLI flag > manifest field > default.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from segxai.metrics import aggregate, confusion, metric_set
from segxai.perturb import FillPolicy, StrategyKind, Threshold, apply_visibility, threshold_heatmap, visible_set
from segxai.pipeline import (
    ConfigError,
    EvaluationManifest,
    Evaluator,
    PipelineError,
    fmt_threshold,
    load_result,
)
from segxai.raster import RasterError, load_heatmap, load_image, load_mask, store_image
from segxai.report import ReportSpec, render_value, write_reports

EXIT_OK = 0
EXIT_EVAL_FAILURE = 1
EXIT_CONFIG = 2


def _fail_config(message: str) -> "NoReturn":  # noqa: F821
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _parse_thresholds(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        _fail_config(f"cannot parse thresholds {text!r}")


def _parse_strategies(text: str) -> tuple[StrategyKind, ...]:
    try:
        return tuple(StrategyKind.parse(s) for s in text.split(","))
    except ValueError as exc:
        _fail_config(str(exc))


@click.group()
@click.version_option()
def main() -> None:
    """Quantify how faithfully saliency heatmaps explain a segmentation model."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--thresholds", default=None, help="Comma-separated thresholds, e.g. 0.2,0.4,0.6,0.8.")
@click.option("--strategies", default=None, help="Comma-separated subset of s1,s2,s3gt,s3pm.")
@click.option("--fill", default=None, type=int, help="Fill sample for masked-out pixels.")
@click.option("--s3-mode", default=None, type=click.Choice(["rerun", "mask"]))
@click.option("--jobs", default=None, type=int, help="Parallel workers for per-image computation.")
@click.option("--no-cache", is_flag=True, default=False, help="Disable the cell result cache.")
@click.option("--focus-threshold", default=None, type=float)
@click.option(
    "--format",
    "formats",
    multiple=True,
    type=click.Choice(["csv", "json", "markdown"]),
    help="Report format(s); default markdown.",
)
def evaluate(manifest_path, thresholds, strategies, fill, s3_mode, jobs, no_cache, focus_threshold, formats):
    """Run the full evaluation described by a manifest and write reports."""
    try:
        manifest = EvaluationManifest.from_json(manifest_path)
        overrides = {}
        if thresholds is not None:
            overrides["thresholds"] = _parse_thresholds(thresholds)
        if strategies is not None:
            overrides["strategies"] = _parse_strategies(strategies)
        if fill is not None:
            overrides["fill"] = FillPolicy(fill)
        if s3_mode is not None:
            overrides["s3_mode"] = s3_mode
        if jobs is not None:
            overrides["jobs"] = jobs
        if no_cache:
            overrides["cache"] = False
        if overrides:
            manifest = dataclasses.replace(manifest, **overrides)
        evaluator = Evaluator(manifest)
        result = evaluator.run_all()
    except (ConfigError, RasterError, ValueError) as exc:
        _fail_config(str(exc))

    spec = ReportSpec(
        formats=tuple(formats) or ("markdown",),
        focus_threshold=focus_threshold if focus_threshold is not None else 0.4,
    )
    # render only thresholds whose every cell completed
    failed = {(f.key.threshold, f.key.strategy, f.key.method) for f in result.failures}
    complete = [
        t
        for t in manifest.thresholds
        if not any(ft == t for ft, _, _ in failed)
    ]
    try:
        write_reports(result, manifest.out_dir / "reports", spec, complete)
    except ConfigError as exc:
        _fail_config(str(exc))

    n_cells = len(result.cells)
    click.echo(f"baseline + {n_cells} cells evaluated; results in {manifest.out_dir / 'results'}")
    if result.failures:
        for f in result.failures:
            click.echo(
                f"failed cell: method={f.key.method} threshold={fmt_threshold(f.key.threshold)} "
                f"strategy={f.key.strategy.value}: {f.error}",
                err=True,
            )
        sys.exit(EXIT_EVAL_FAILURE)


@main.command()
@click.option("--image", "image_path", required=True, type=click.Path(path_type=Path))
@click.option("--heatmap", "heatmap_path", required=True, type=click.Path(path_type=Path))
@click.option("--threshold", required=True, type=float)
@click.option("--strategy", required=True, type=str)
@click.option("--reference", "reference_path", default=None, type=click.Path(path_type=Path))
@click.option("--fill", default=0, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def perturb(image_path, heatmap_path, threshold, strategy, reference_path, fill, out_path):
    """Edit a single image for inspection and write the result as PNG."""
    try:
        kind = StrategyKind.parse(strategy)
        img = load_image(image_path)
        heatmap = load_heatmap(heatmap_path)
        reference = load_mask(reference_path) if reference_path is not None else None
        relevance = threshold_heatmap(heatmap, Threshold(threshold))
        vis = visible_set(kind, relevance, reference)
        edited = apply_visibility(img, vis, FillPolicy(fill))
    except (RasterError, ValueError) as exc:
        _fail_config(str(exc))
    store_image(edited, out_path)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--pred", "pred_dir", required=True, type=click.Path(path_type=Path))
@click.option("--ref", "ref_dir", required=True, type=click.Path(path_type=Path))
def metrics(pred_dir, ref_dir):
    """Compute confusion counts and metrics over two directories of masks."""
    try:
        pred_ids = {p.stem for p in Path(pred_dir).glob("*.png")}
        ref_ids = {p.stem for p in Path(ref_dir).glob("*.png")}
        if not pred_ids:
            raise ConfigError(f"no masks found under {pred_dir}")
        if pred_ids != ref_ids:
            missing = sorted(pred_ids ^ ref_ids)
            raise ConfigError(f"unmatched mask ids between directories: {missing}")
        counts = []
        for image_id in sorted(pred_ids):
            pred = load_mask(Path(pred_dir) / f"{image_id}.png", "prediction")
            ref = load_mask(Path(ref_dir) / f"{image_id}.png", "ground-truth")
            counts.append(confusion(pred, ref))
        total = aggregate(counts)
        m = metric_set(total)
    except (ConfigError, RasterError, ValueError) as exc:
        _fail_config(str(exc))
    click.echo(f"images:      {len(counts)}")
    click.echo(f"tp/fp/fn/tn: {total.tp}/{total.fp}/{total.fn}/{total.tn}")
    click.echo(f"precision:   {render_value(m.precision, 2)}")
    click.echo(f"recall:      {render_value(m.recall, 2)}")
    click.echo(f"f1:          {render_value(m.f1, 2)}")
    click.echo(f"iou (micro): {render_value(m.iou_micro, 2)}")


def _report_common(results_dir, out_dir, formats, focus_threshold, all_thresholds: bool):
    try:
        result = load_result(Path(results_dir))
        spec = ReportSpec(
            formats=tuple(formats) or ("markdown",),
            focus_threshold=focus_threshold if focus_threshold is not None else 0.4,
        )
        thresholds = result.metadata.get("thresholds", []) if all_thresholds else None
        out = Path(out_dir) if out_dir else Path(results_dir).parent / "reports"
        written = write_reports(result, out, spec, thresholds)
    except (ConfigError, RasterError, ValueError, json.JSONDecodeError) as exc:
        _fail_config(str(exc))
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--results", "results_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", default=None, type=click.Path(path_type=Path))
@click.option(
    "--format", "formats", multiple=True, type=click.Choice(["csv", "json", "markdown"])
)
@click.option("--focus-threshold", default=None, type=float)
def report(results_dir, out_dir, formats, focus_threshold):
    """Render tables for the focus threshold from persisted results."""
    _report_common(results_dir, out_dir, formats, focus_threshold, all_thresholds=False)


@main.command()
@click.option("--results", "results_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", default=None, type=click.Path(path_type=Path))
@click.option(
    "--format", "formats", multiple=True, type=click.Choice(["csv", "json", "markdown"])
)
def sweep(results_dir, out_dir, formats):
    """Render tables for every (strategy, threshold) pair."""
    _report_common(results_dir, out_dir, formats, None, all_thresholds=True)


if __name__ == "__main__":
    main()
