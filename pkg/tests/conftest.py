import numpy as np
import pytest
from PIL import Image

from recolor import colorspace


def make_smooth_rgb(rng, side=64, cells=4):
    """A low-frequency random color field: colorful but learnable."""
    coarse = rng.integers(30, 226, size=(cells, cells, 3), dtype=np.uint8)
    img = Image.fromarray(coarse).resize((side, side), Image.BILINEAR)
    return np.asarray(img, dtype=np.uint8)


def write_corpus(root, count, side=64, seed=0, prefix="img"):
    """Write ``count`` deterministic PNG images under ``root``."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        path = root / f"{prefix}_{i:03d}.png"
        Image.fromarray(make_smooth_rgb(rng, side=side)).save(path)
        paths.append(path)
    return paths


def write_overfit_corpus(root, count=32, side=64, seed=123):
    """Images whose chrominance is a fixed function of luminance.

    Random smooth luminance fields; hue rotates with L at constant chroma
    radius, so every image has the same target power and the mapping is
    pointwise learnable. Built for overfit smoke tests.
    """
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        coarse = rng.uniform(30.0, 80.0, size=(3, 3))
        L = np.asarray(
            Image.fromarray(coarse).resize((side, side), Image.BILINEAR), dtype=np.float64
        )
        theta = 2 * np.pi * (L - 30.0) / 50.0
        lab = colorspace.LabImage(L=L, a=22.0 * np.cos(theta), b=22.0 * np.sin(theta))
        path = root / f"tone_{i:02d}.png"
        Image.fromarray(colorspace.lab_to_rgb(lab)).save(path)
        paths.append(path)
    return paths


@pytest.fixture
def toy_corpus(tmp_path):
    """Eight small color images on disk."""
    return tmp_path / "corpus", write_corpus(tmp_path / "corpus", 8)


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {name}: {report.outcome.upper()}", flush=True)
