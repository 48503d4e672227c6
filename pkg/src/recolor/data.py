"""Self-supervised training pairs from a directory of color images.

Every color image is its own supervision: the luminance plane is the
input and the true chrominance planes are the regression target. Both
sides are stored network-encoded (see ``colorspace``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import colorspace
from .errors import ConfigError, IngestError

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}

DEFAULT_SIDE = 224


@dataclass
class Sample:
    """One training pair: encoded luminance in, encoded real chrominance out."""

    input_L: np.ndarray  # (H, W) float32 in [0, 1]
    target_ab: np.ndarray  # (H, W, 2) float32 in [-1, 1]
    source_id: str

    def __post_init__(self):
        if self.input_L.shape != self.target_ab.shape[:2] or self.target_ab.shape[2:] != (2,):
            raise ConfigError(
                f"inconsistent sample shapes: L{self.input_L.shape} ab{self.target_ab.shape}"
            )


@dataclass
class Batch:
    samples: list[Sample]

    def __post_init__(self):
        if not self.samples:
            raise ConfigError("batch must contain at least one sample")
        shapes = {s.input_L.shape for s in self.samples}
        if len(shapes) != 1:
            raise ConfigError(f"samples in a batch must share H x W, got {shapes}")

    @property
    def size(self) -> int:
        return len(self.samples)

    @property
    def source_ids(self) -> list[str]:
        return [s.source_id for s in self.samples]

    @property
    def input_L(self) -> np.ndarray:
        """Stacked luminance, shape ``(N, H, W)``."""
        return np.stack([s.input_L for s in self.samples])

    @property
    def target_ab(self) -> np.ndarray:
        """Stacked chrominance targets, shape ``(N, H, W, 2)``."""
        return np.stack([s.target_ab for s in self.samples])


def prepare_sample(path, side: int = DEFAULT_SIDE) -> Sample:
    """Load one corpus image and manufacture its training pair.

    The image is bilinearly resized to ``side x side``, converted to Lab,
    and split into encoded luminance and chrominance. Grayscale sources
    pass through the same path and yield near-zero targets.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB").resize((side, side), Image.BILINEAR)
            arr = np.asarray(rgb, dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise IngestError(path, exc) from exc
    lab = colorspace.rgb_to_lab(arr)
    return Sample(
        input_L=colorspace.encode_luminance(lab.L).astype(np.float32),
        target_ab=colorspace.encode_chroma(lab.ab()).astype(np.float32),
        source_id=str(path),
    )


def list_corpus(corpus) -> list[Path]:
    """Resolve a corpus to a sorted list of image paths.

    ``corpus`` is either a directory (scanned recursively for PNG/JPEG)
    or a manifest file with one path per line (blank lines ignored,
    relative paths resolved against the manifest's directory).
    """
    corpus = Path(corpus)
    if corpus.is_dir():
        paths = sorted(
            p for p in corpus.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()
        )
    elif corpus.is_file():
        paths = []
        for line in corpus.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            p = Path(line)
            paths.append(p if p.is_absolute() else corpus.parent / p)
    else:
        raise ConfigError(f"corpus not found: {corpus}")
    if not paths:
        raise ConfigError(f"corpus is empty: {corpus}")
    return paths


def batch_iterator(corpus, batch_size: int, shuffle_seed=None, side: int = DEFAULT_SIDE,
                   workers: int = 0):
    """Yield every corpus sample exactly once, grouped into batches.

    The final partial batch is kept. With ``shuffle_seed=None`` samples
    arrive in sorted path order; otherwise in the seed's permutation
    (identical seed, identical order). ``workers > 0`` prefetches sample
    decoding on a thread pool without changing the delivered order.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    paths = list_corpus(corpus)
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(paths)

    if workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = pool.map(lambda p: prepare_sample(p, side), paths)
            yield from _group(samples, batch_size)
    else:
        yield from _group((prepare_sample(p, side) for p in paths), batch_size)


def _group(samples, batch_size):
    bucket = []
    for sample in samples:
        bucket.append(sample)
        if len(bucket) == batch_size:
            yield Batch(bucket)
            bucket = []
    if bucket:
        yield Batch(bucket)
