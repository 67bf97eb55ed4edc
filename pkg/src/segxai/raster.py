"""Raster I/O: 8-bit images, binary masks, and [0,1] heatmaps.

On-disk encodings are fixed and validated strictly:

* images: 8-bit PNG, grayscale or RGB
* masks:  8-bit single-channel PNG, positive iff sample != 0 (written as 255/0)
* heatmaps: either NPY v1.0 (little-endian float32, C-order, shape (H, W))
  or 16-bit single-channel PNG (sample / 65535)

Loaders never resize, pad, or normalize; out-of-range heatmap values are
rejected, not clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

MASK_ROLES = ("ground-truth", "prediction", "relevance", "visibility")

HEATMAP_PNG_SCALE = 65535


class RasterError(ValueError):
    """Raised for malformed raster files or invalid raster construction."""


def _frozen_array(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageRaster:
    """8-bit image, shape (height, width, channels) with 1 or 3 channels."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise RasterError(f"image must have 1 or 3 channels, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise RasterError(f"image samples must be uint8, got {arr.dtype}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise RasterError("image dimensions must be at least 1x1")
        object.__setattr__(self, "samples", _frozen_array(arr))

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class BinaryMask:
    """Boolean mask, shape (height, width), tagged with its role."""

    bits: np.ndarray
    role: str = "prediction"

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise RasterError(f"mask must be 2-dimensional, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            raise RasterError(f"mask bits must be boolean, got {arr.dtype}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise RasterError("mask dimensions must be at least 1x1")
        if self.role not in MASK_ROLES:
            raise RasterError(f"unknown mask role {self.role!r}")
        object.__setattr__(self, "bits", _frozen_array(arr))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def positive_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def negative_count(self) -> int:
        return self.bits.size - self.positive_count

    def with_role(self, role: str) -> "BinaryMask":
        return BinaryMask(self.bits, role)


@dataclass(frozen=True)
class Heatmap:
    """Per-pixel saliency in [0,1], shape (height, width)."""

    values: np.ndarray
    method_id: str = ""

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise RasterError(f"heatmap must be 2-dimensional, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise RasterError("heatmap dimensions must be at least 1x1")
        arr = arr.astype(np.float32, copy=False)
        if np.isnan(arr).any():
            raise RasterError("heatmap contains NaN")
        if (arr < 0.0).any() or (arr > 1.0).any():
            raise RasterError("heatmap value out of range [0, 1]")
        object.__setattr__(self, "values", _frozen_array(arr))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _open_png(path: Path | str) -> Image.Image:
    path = Path(path)
    if not path.is_file():
        raise RasterError(f"no such file: {path}")
    try:
        im = Image.open(path)
        im.load()
    except UnidentifiedImageError as exc:
        raise RasterError(f"not a decodable image: {path}") from exc
    except OSError as exc:
        raise RasterError(f"corrupt image stream: {path}: {exc}") from exc
    if im.format != "PNG":
        raise RasterError(f"unsupported format {im.format!r} (PNG required): {path}")
    return im


def load_image(path: Path | str) -> ImageRaster:
    """Load an 8-bit grayscale or RGB PNG."""
    im = _open_png(path)
    if im.mode in ("I", "I;16"):
        raise RasterError(f"unsupported bit depth (16-bit) for image: {path}")
    if im.mode not in ("L", "RGB"):
        raise RasterError(f"unsupported channel layout {im.mode!r} for image: {path}")
    arr = np.asarray(im, dtype=np.uint8)
    return ImageRaster(arr)


def store_image(img: ImageRaster, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = img.samples[:, :, 0] if img.channels == 1 else img.samples
    Image.fromarray(arr).save(path, format="PNG")


def load_mask(path: Path | str, role: str = "prediction") -> BinaryMask:
    """Load an 8-bit single-channel PNG mask; positive iff sample != 0."""
    im = _open_png(path)
    if im.mode in ("I", "I;16"):
        raise RasterError(f"unsupported bit depth (16-bit) for mask: {path}")
    if im.mode != "L":
        raise RasterError(f"mask must be single-channel 8-bit, got {im.mode!r}: {path}")
    arr = np.asarray(im, dtype=np.uint8)
    return BinaryMask(arr != 0, role)


def store_mask(mask: BinaryMask, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.where(mask.bits, np.uint8(255), np.uint8(0))
    Image.fromarray(arr).save(path, format="PNG")


def _load_heatmap_npy(path: Path, method_id: str) -> Heatmap:
    with open(path, "rb") as fh:
        try:
            version = np.lib.format.read_magic(fh)
        except ValueError as exc:
            raise RasterError(f"malformed NPY header: {path}: {exc}") from exc
        if version != (1, 0):
            raise RasterError(f"unsupported NPY version {version} (1.0 required): {path}")
        try:
            shape, fortran_order, dtype = np.lib.format.read_array_header_1_0(fh)
        except ValueError as exc:
            raise RasterError(f"malformed NPY header: {path}: {exc}") from exc
        if dtype != np.dtype("<f4"):
            raise RasterError(f"NPY heatmap must be little-endian float32, got {dtype}: {path}")
        if fortran_order:
            raise RasterError(f"NPY heatmap must be C-order: {path}")
        if len(shape) != 2:
            raise RasterError(f"NPY heatmap must have rank 2, got shape {shape}: {path}")
        count = int(np.prod(shape))
        data = fh.read(count * 4)
        if len(data) != count * 4:
            raise RasterError(f"truncated NPY data: {path}")
        arr = np.frombuffer(data, dtype="<f4").reshape(shape)
    return Heatmap(arr, method_id)


def _load_heatmap_png(path: Path, method_id: str) -> Heatmap:
    im = _open_png(path)
    if im.mode not in ("I", "I;16"):
        raise RasterError(f"PNG heatmap must be 16-bit single-channel, got {im.mode!r}: {path}")
    arr = np.asarray(im).astype(np.float32)
    return Heatmap(arr / HEATMAP_PNG_SCALE, method_id)


def load_heatmap(path: Path | str, method_id: str = "") -> Heatmap:
    """Load a heatmap from NPY (by .npy suffix) or 16-bit PNG."""
    path = Path(path)
    if path.suffix == ".npy":
        if not path.is_file():
            raise RasterError(f"no such file: {path}")
        return _load_heatmap_npy(path, method_id)
    return _load_heatmap_png(path, method_id)


def store_heatmap(h: Heatmap, path: Path | str) -> None:
    """Store a heatmap as NPY (by .npy suffix, lossless) or 16-bit PNG (quantized)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".npy":
        with open(path, "wb") as fh:
            np.lib.format.write_array(fh, np.ascontiguousarray(h.values), version=(1, 0))
    else:
        arr = np.round(h.values.astype(np.float64) * HEATMAP_PNG_SCALE).astype(np.uint16)
        Image.fromarray(arr).save(path, format="PNG")
