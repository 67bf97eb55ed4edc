import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from segxai.raster import BinaryMask, Heatmap, ImageRaster, store_heatmap, store_image, store_mask


def make_synthetic_dataset(
    root: Path,
    n_images: int = 20,
    size: int = 32,
    methods: tuple[str, ...] = ("cam-a", "cam-b"),
    seed: int = 7,
) -> list[str]:
    """Write a small dataset with images, gt masks, heatmaps, and probability
    maps for the visibility-prob builtin runner.

    Image samples are drawn from 1..255 so no pixel ever matches the default
    fill value 0 (the visibility-prob oracle detects masking by exact match).
    """
    rng = np.random.default_rng(seed)
    ids = [f"img{i:03d}" for i in range(n_images)]
    for image_id in ids:
        img = rng.integers(1, 256, size=(size, size, 3), dtype=np.uint8)
        store_image(ImageRaster(img), root / "images" / f"{image_id}.png")
        gt = rng.random((size, size)) < 0.35
        store_mask(BinaryMask(gt, "ground-truth"), root / "gt" / f"{image_id}.png")
        prob = rng.random((size, size)).astype(np.float32)
        store_heatmap(Heatmap(prob), root / "probs" / f"{image_id}.npy")
        for method in methods:
            heat = rng.random((size, size)).astype(np.float32)
            store_heatmap(Heatmap(heat, method), root / "heatmaps" / method / f"{image_id}.npy")
    return ids


def pytest_terminal_summary(terminalreporter):
    # echo one line per acceptance criterion after the run
    try:
        from test_acceptance import CRITERION_LINES
    except ImportError:
        return
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    # read-only across tests; per-test output dirs keep runs isolated
    root = tmp_path_factory.mktemp("dataset")
    ids = make_synthetic_dataset(root)
    return root, ids
