"""Chrominance PSNR and naturalness aggregation.

PSNR is computed on the two chrominance planes only, after quantizing
them to 8 bits (value + 128, clamped to [0, 255]); the peak is 255. A
zero-MSE comparison returns the 99 dB sentinel instead of infinity. The
corpus-level score is the mean of per-image PSNRs, reported next to the
same statistic for the constant zero-chroma predictor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import colorspace, data
from .colorspace import LabImage
from .errors import FormatError, UndefinedStatisticError
from .networks import generator_forward

PSNR_CAP_DB = 99.0


def _quantize_ab(plane: np.ndarray) -> np.ndarray:
    return np.clip(np.round(plane + 128.0), 0, 255)


def psnr_ab(pred: LabImage, truth: LabImage) -> float:
    """Peak signal-to-noise ratio over the 8-bit-encoded (a, b) planes."""
    if (pred.height, pred.width) != (truth.height, truth.width):
        raise FormatError(
            f"size mismatch: {pred.height}x{pred.width} vs {truth.height}x{truth.width}"
        )
    diff_a = _quantize_ab(pred.a) - _quantize_ab(truth.a)
    diff_b = _quantize_ab(pred.b) - _quantize_ab(truth.b)
    mse = (np.mean(diff_a**2) + np.mean(diff_b**2)) / 2.0
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(255.0**2 / mse))


@dataclass
class ImageScore:
    image_id: str
    psnr: float
    baseline_psnr: float


@dataclass
class EvalReport:
    scores: list[ImageScore]
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def image_count(self) -> int:
        return len(self.scores)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([s.psnr for s in self.scores]))

    @property
    def baseline_mean_psnr(self) -> float:
        return float(np.mean([s.baseline_psnr for s in self.scores]))

    def to_tsv(self) -> str:
        lines = ["image_id\tpsnr_db\tbaseline_psnr_db"]
        lines += [f"{s.image_id}\t{s.psnr:.6f}\t{s.baseline_psnr:.6f}" for s in self.scores]
        lines.append(f"#mean\t{self.mean_psnr:.6f}\t{self.baseline_mean_psnr:.6f}")
        lines.append(f"#images\t{self.image_count}\t")
        lines.append(f"#failures\t{len(self.failures)}\t")
        return "\n".join(lines) + "\n"

    def to_record(self) -> dict:
        """Machine-readable counterpart of the TSV report."""
        return {
            "v": 1,
            "image_count": self.image_count,
            "mean_psnr_db": self.mean_psnr,
            "baseline_mean_psnr_db": self.baseline_mean_psnr,
            "scores": [
                {"image_id": s.image_id, "psnr_db": s.psnr, "baseline_psnr_db": s.baseline_psnr}
                for s in self.scores
            ],
            "failures": [{"image_id": i, "error": e} for i, e in self.failures],
        }


def colorize_plane(generator, encoded_L: np.ndarray) -> np.ndarray:
    """Predict decoded (a, b) planes, shape (H, W, 2), for one encoded L plane."""
    was_training = generator.training
    generator.eval()
    with torch.no_grad():
        out = generator_forward(generator, encoded_L[None, ...])
    if was_training:
        generator.train()
    return colorspace.decode_chroma(out.ab[0].numpy())


def evaluate_model(model, corpus, side: int | None = None) -> EvalReport:
    """Colorize every corpus image and score against its own chrominance.

    ``model`` is a generator module or a checkpoint path. Per-image
    failures are recorded and excluded rather than aborting the sweep.
    The baseline column scores the a=b=0 predictor on the same ground
    truth.
    """
    if isinstance(model, (str, Path)):
        from .trainer import load_checkpoint

        generator = load_checkpoint(model).generator
    else:
        generator = model
    side = side if side is not None else generator.config.input_side
    scores, failures = [], []
    for path in data.list_corpus(corpus):
        try:
            sample = data.prepare_sample(path, side=side)
            truth = LabImage(
                L=colorspace.decode_luminance(sample.input_L),
                a=colorspace.decode_chroma(sample.target_ab[..., 0]),
                b=colorspace.decode_chroma(sample.target_ab[..., 1]),
            )
            pred_ab = colorize_plane(generator, sample.input_L)
            pred = LabImage(L=truth.L, a=pred_ab[..., 0], b=pred_ab[..., 1])
            zero = LabImage(L=truth.L, a=np.zeros_like(truth.a), b=np.zeros_like(truth.b))
            scores.append(
                ImageScore(
                    image_id=str(path),
                    psnr=psnr_ab(pred, truth),
                    baseline_psnr=psnr_ab(zero, truth),
                )
            )
        except Exception as exc:  # noqa: BLE001 - per-image isolation is the contract
            failures.append((str(path), str(exc)))
    return EvalReport(scores=scores, failures=failures)


@dataclass(frozen=True)
class Judgment:
    image_id: str
    method_id: str
    realistic: bool
    participant_id: str


def naturalness(judgments, method_id: str) -> float:
    """Percentage of judgments calling ``method_id`` realistic."""
    votes = [j.realistic for j in judgments if j.method_id == method_id]
    if not votes:
        raise UndefinedStatisticError(f"no judgments recorded for method '{method_id}'")
    return 100.0 * sum(votes) / len(votes)
