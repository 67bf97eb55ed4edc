"""Runner protocol: how predicted masks are obtained for a batch of images.

Three modes:

* subprocess — invoke an external command with ``--manifest <json> --out <dir>``;
  the command must write ``<dir>/<id>.png`` for every entry and exit 0
* precomputed — load ``<dir>/<id>.png`` from an existing directory
* builtin — synthetic oracles used for tests and desk-scale acceptance
  ("identity-gt" and "visibility-prob")
"""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from segxai.perturb import FillPolicy
from segxai.raster import BinaryMask, Heatmap, ImageRaster, load_image, load_mask

BUILTIN_KINDS = ("identity-gt", "visibility-prob")

DEFAULT_TIMEOUT = 600.0


class RunnerError(RuntimeError):
    """Raised when a runner violates the protocol or fails outright."""


@dataclass(frozen=True)
class BatchEntry:
    id: str
    image: Path


@dataclass(frozen=True)
class BatchManifest:
    entries: tuple[BatchEntry, ...]
    target_class: str = "building"
    schema: int = 1

    def __post_init__(self) -> None:
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate entry ids in batch manifest: {dupes}")

    def to_json(self) -> dict:
        return {
            "schema": self.schema,
            "target_class": self.target_class,
            "entries": [{"id": e.id, "image": str(e.image)} for e in self.entries],
        }

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class RunnerSpec:
    """Declarative runner configuration; exactly one mode's fields are used."""

    mode: str
    command: Optional[tuple[str, ...]] = None
    pred_dir: Optional[Path] = None
    builtin: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT
    reentrant: bool = False

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("runner timeout must be positive")
        if self.mode == "subprocess":
            if not self.command:
                raise ValueError("subprocess runner requires a command")
        elif self.mode == "precomputed":
            if self.pred_dir is None:
                raise ValueError("precomputed runner requires a prediction directory")
        elif self.mode == "builtin":
            if self.builtin not in BUILTIN_KINDS:
                raise ValueError(
                    f"unknown builtin runner {self.builtin!r} "
                    f"(expected one of: {', '.join(BUILTIN_KINDS)})"
                )
        else:
            raise ValueError(f"unknown runner mode {self.mode!r}")

    @property
    def identity(self) -> str:
        """Stable string identifying the runner for caching and run metadata."""
        if self.mode == "subprocess":
            return "subprocess:" + " ".join(self.command)
        if self.mode == "precomputed":
            return f"precomputed:{self.pred_dir}"
        return f"builtin:{self.builtin}"


def builtin_visibility_prob(img: ImageRaster, prob: Heatmap, fill: FillPolicy) -> BinaryMask:
    """Synthetic model: positive iff prob >= 0.5 and the pixel was not masked out.

    A pixel counts as masked out when every channel equals the fill sample, so
    test images must avoid genuinely fill-colored pixels.
    """
    if img.shape != prob.shape:
        raise RunnerError(f"probability map shape {prob.shape} != image shape {img.shape}")
    visible = ~(img.samples == np.uint8(fill.sample)).all(axis=2)
    return BinaryMask((prob.values >= np.float32(0.5)) & visible, "prediction")


class Runner:
    """Maps a batch of images to predicted masks."""

    def predict(self, manifest: BatchManifest, out_dir: Path) -> dict[str, BinaryMask]:
        raise NotImplementedError


class SubprocessRunner(Runner):
    def __init__(self, command: tuple[str, ...], timeout: float = DEFAULT_TIMEOUT):
        self.command = tuple(command)
        self.timeout = timeout

    def predict(self, manifest: BatchManifest, out_dir: Path) -> dict[str, BinaryMask]:
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest_path = out_dir / "manifest.json"
        manifest.write(manifest_path)
        cmd = list(self.command) + ["--manifest", str(manifest_path), "--out", str(out_dir)]
        try:
            proc = subprocess.run(
                cmd,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise RunnerError(f"runner timed out after {self.timeout}s: {cmd}") from exc
        if proc.stderr:
            sys.stderr.write(proc.stderr)
        if proc.returncode != 0:
            raise RunnerError(f"runner exited with status {proc.returncode}: {cmd}")
        masks = {}
        for entry in manifest.entries:
            mask_path = out_dir / f"{entry.id}.png"
            if not mask_path.is_file():
                raise RunnerError(f"runner wrote no mask for id {entry.id!r} ({mask_path})")
            masks[entry.id] = load_mask(mask_path, "prediction")
        return masks


class PrecomputedRunner(Runner):
    def __init__(self, pred_dir: Path):
        self.pred_dir = Path(pred_dir)

    def predict(self, manifest: BatchManifest, out_dir: Path) -> dict[str, BinaryMask]:
        masks = {}
        for entry in manifest.entries:
            mask_path = self.pred_dir / f"{entry.id}.png"
            if not mask_path.is_file():
                raise RunnerError(f"no precomputed mask for id {entry.id!r} ({mask_path})")
            masks[entry.id] = load_mask(mask_path, "prediction")
        return masks


class IdentityGtRunner(Runner):
    """Returns the ground-truth mask for every id, ignoring the image content."""

    def __init__(self, gt: Mapping[str, BinaryMask]):
        self.gt = gt

    def predict(self, manifest: BatchManifest, out_dir: Path) -> dict[str, BinaryMask]:
        masks = {}
        for entry in manifest.entries:
            if entry.id not in self.gt:
                raise RunnerError(f"no ground-truth mask registered for id {entry.id!r}")
            masks[entry.id] = self.gt[entry.id].with_role("prediction")
        return masks


class VisibilityProbRunner(Runner):
    """Applies builtin_visibility_prob with per-id registered probability maps."""

    def __init__(self, probs: Mapping[str, Heatmap], fill: FillPolicy):
        self.probs = probs
        self.fill = fill

    def predict(self, manifest: BatchManifest, out_dir: Path) -> dict[str, BinaryMask]:
        masks = {}
        for entry in manifest.entries:
            if entry.id not in self.probs:
                raise RunnerError(f"no probability map registered for id {entry.id!r}")
            img = load_image(entry.image)
            masks[entry.id] = builtin_visibility_prob(img, self.probs[entry.id], self.fill)
        return masks


def run_batch(
    runner: Runner,
    manifest: BatchManifest,
    out_dir: Path,
    expected_shapes: Optional[Mapping[str, tuple[int, int]]] = None,
) -> dict[str, BinaryMask]:
    """Drive a runner over a batch and validate every returned mask."""
    masks = runner.predict(manifest, out_dir)
    for entry in manifest.entries:
        if entry.id not in masks:
            raise RunnerError(f"runner produced no mask for id {entry.id!r}")
        if expected_shapes is not None:
            want = expected_shapes[entry.id]
            got = masks[entry.id].shape
            if got != want:
                raise RunnerError(
                    f"mask for id {entry.id!r} has shape {got}, image has shape {want}"
                )
    return masks
