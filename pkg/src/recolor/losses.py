"""The three-term objective and its adversarial counterpart.

Generator total = color error + lambda_g * (-mean critic score on fakes)
+ lambda_s * KL(teacher || generated). Critic total = -(mean score on
real - mean score on fake) + gp_weight * gradient penalty, so the critic
ascends the Wasserstein gap by minimizing. All expectations are realized
as mini-batch means.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch

from .errors import FormatError

KL_FLOOR = 1e-8


@dataclass
class LossWeights:
    lambda_g: float = 0.1
    lambda_s: float = 0.003
    gp_weight: float = 1.0

    def __post_init__(self):
        if min(self.lambda_g, self.lambda_s, self.gp_weight) < 0:
            raise FormatError("loss weights must be non-negative")


@dataclass
class LossReport:
    """Per-step scalar record; serializes to one metrics-log row."""

    color_error: float = 0.0
    class_kl: float = 0.0
    adv_generator: float = 0.0
    critic_real: float = 0.0
    critic_fake: float = 0.0
    gradient_penalty: float = 0.0
    total_generator: float = 0.0
    total_critic: float = 0.0

    FIELDS = (
        "color_error",
        "class_kl",
        "adv_generator",
        "critic_real",
        "critic_fake",
        "gradient_penalty",
        "total_generator",
        "total_critic",
    )

    def values(self) -> dict:
        return asdict(self)


def color_error(pred_ab: torch.Tensor, real_ab: torch.Tensor) -> torch.Tensor:
    """Mean over batch and pixels of the squared (a, b) Euclidean distance."""
    if pred_ab.shape != real_ab.shape:
        raise FormatError(f"shape mismatch: {tuple(pred_ab.shape)} vs {tuple(real_ab.shape)}")
    return ((pred_ab - real_ab) ** 2).sum(dim=-1).mean()


def class_kl(teacher_dist: torch.Tensor, generated_dist: torch.Tensor) -> torch.Tensor:
    """KL(teacher || generated), averaged over the batch.

    Generated probabilities are floored at ``KL_FLOOR`` against softmax
    underflow; zero teacher entries contribute exactly zero.
    """
    if teacher_dist.shape != generated_dist.shape:
        raise FormatError(
            f"distribution shapes differ: {tuple(teacher_dist.shape)} vs {tuple(generated_dist.shape)}"
        )
    p = teacher_dist if teacher_dist.ndim == 2 else teacher_dist.unsqueeze(0)
    q = generated_dist if generated_dist.ndim == 2 else generated_dist.unsqueeze(0)
    per_row = (torch.xlogy(p, p) - p * torch.log(q.clamp_min(KL_FLOOR))).sum(dim=1)
    return per_row.mean()


def _resolve_rng(rng) -> torch.Generator | None:
    if rng is None or isinstance(rng, torch.Generator):
        return rng
    gen = torch.Generator()
    gen.manual_seed(int(rng))
    return gen


def gradient_penalty(critic, real_batch: torch.Tensor, fake_batch: torch.Tensor,
                     rng=None) -> torch.Tensor:
    """Penalize the critic's input-gradient norm away from 1.

    One interpolate per sample, uniform along the straight line between
    the real and fake points; returns the batch mean of (||grad|| - 1)^2.
    ``critic`` is any differentiable callable mapping a batch to
    per-sample (or per-patch) scores.
    """
    if real_batch.shape != fake_batch.shape:
        raise FormatError(
            f"real/fake shapes differ: {tuple(real_batch.shape)} vs {tuple(fake_batch.shape)}"
        )
    n = real_batch.shape[0]
    gen = _resolve_rng(rng)
    u = torch.rand((n,) + (1,) * (real_batch.ndim - 1), generator=gen,
                   dtype=real_batch.dtype)
    mixed = (u * real_batch.detach() + (1.0 - u) * fake_batch.detach()).requires_grad_(True)
    scores = critic(mixed)
    if not scores.requires_grad:
        raise FormatError("critic output does not depend differentiably on its input")
    (grads,) = torch.autograd.grad(scores.sum(), mixed, create_graph=True)
    norms = grads.reshape(n, -1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def critic_objective(critic, real_batch: torch.Tensor, fake_batch: torch.Tensor,
                     weights: LossWeights, rng=None):
    """Critic loss and its components.

    Returns ``(total, parts)`` where ``parts`` holds critic_real,
    critic_fake, and gradient_penalty scalars. Minimizing the total
    widens mean score(real) - mean score(fake).
    """
    score_real = critic(real_batch).mean()
    score_fake = critic(fake_batch).mean()
    gp = gradient_penalty(critic, real_batch, fake_batch, rng=rng)
    total = -(score_real - score_fake) + weights.gp_weight * gp
    parts = {
        "critic_real": float(score_real.detach()),
        "critic_fake": float(score_fake.detach()),
        "gradient_penalty": float(gp.detach()),
        "total_critic": float(total.detach()),
    }
    return total, parts


def generator_objective(pred_ab: torch.Tensor, real_ab: torch.Tensor,
                        class_dist: torch.Tensor | None,
                        teacher_dist: torch.Tensor | None,
                        critic, fake_lab: torch.Tensor | None,
                        weights: LossWeights):
    """Weighted generator loss; returns ``(total, LossReport)``.

    With ``lambda_g == 0`` the critic is never consulted; with
    ``lambda_s == 0`` the teacher target is ignored. The report carries
    only generator-side fields; the trainer merges in critic fields.
    """
    err = color_error(pred_ab, real_ab)
    total = err

    adv = None
    if weights.lambda_g > 0:
        if critic is None or fake_lab is None:
            raise FormatError("adversarial term requested without a critic input")
        adv = -critic(fake_lab).mean()
        total = total + weights.lambda_g * adv

    kl = None
    if weights.lambda_s > 0:
        if class_dist is None or teacher_dist is None:
            raise FormatError("class term requested without distributions")
        kl = class_kl(teacher_dist, class_dist)
        total = total + weights.lambda_s * kl

    report = LossReport(
        color_error=float(err.detach()),
        class_kl=0.0 if kl is None else float(kl.detach()),
        adv_generator=0.0 if adv is None else float(adv.detach()),
        total_generator=float(total.detach()),
    )
    return total, report
