"""Alternating min-max training with Adam, checkpointing, and metrics.

Each step runs ``critic_steps_per_gen_step`` critic updates on detached
generator output, then one generator update. Runs are deterministic for
a fixed (seed, config, corpus): module init, the per-epoch shuffle, and
the gradient-penalty interpolation draws are all derived from the config
seed, and checkpoints capture optimizer moments plus the draw RNG state
so a resumed run continues bit-for-bit.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import torch

from . import data
from .errors import CheckpointError, ConfigError, RecolorError, TrainingError
from .losses import LossReport, LossWeights, critic_objective, generator_objective
from .networks import (
    CriticConfig,
    GeneratorConfig,
    build_critic,
    build_generator,
    build_teacher,
    discriminator_forward,
    generator_forward,
    teacher_forward,
)

CHECKPOINT_VERSION = 1

VARIANTS = ("full", "no_class", "no_adversarial")
PROFILES = ("paper", "desk")


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 10
    lr: float = 2e-5
    beta1: float = 0.5
    beta2: float = 0.999
    critic_steps_per_gen_step: int = 1
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    side: int = 224
    m: int = 1000
    variant: str = "full"
    profile: str = "paper"
    workers: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1 or self.critic_steps_per_gen_step < 1:
            raise ConfigError("batch_size and critic_steps_per_gen_step must be >= 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got '{self.variant}'")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}, got '{self.profile}'")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """CPU-scale profile: small nets and a learning rate that moves them."""
        base = dict(side=64, m=10, batch_size=4, lr=2e-4, profile="desk")
        base.update(overrides)
        return cls(**base)

    def effective_weights(self) -> LossWeights:
        w = self.weights
        if self.variant == "no_class":
            w = replace(w, lambda_s=0.0)
        if self.variant == "no_adversarial":
            w = replace(w, lambda_g=0.0)
        return w

    def generator_config(self) -> GeneratorConfig:
        if self.profile == "desk":
            return GeneratorConfig.desk(input_side=self.side, num_classes=self.m)
        return GeneratorConfig(input_side=self.side, num_classes=self.m)

    def critic_config(self) -> CriticConfig:
        if self.profile == "desk":
            return CriticConfig.desk(input_side=self.side)
        return CriticConfig(input_side=self.side)


def save_config(config: TrainConfig, path) -> None:
    Path(path).write_text(json.dumps(asdict(config), indent=2) + "\n")


def load_config(path) -> TrainConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return _config_from_dict(raw)


def _config_from_dict(raw: dict) -> TrainConfig:
    raw = dict(raw)
    if "weights" in raw:
        raw["weights"] = LossWeights(**raw["weights"])
    try:
        return TrainConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad config fields: {exc}") from exc


@dataclass
class TrainState:
    config: TrainConfig
    generator: torch.nn.Module
    critic: torch.nn.Module
    teacher: torch.nn.Module
    gen_opt: torch.optim.Optimizer
    critic_opt: torch.optim.Optimizer
    rng: torch.Generator
    weights: LossWeights
    step: int = 0
    epoch: int = 0


def init_state(config: TrainConfig) -> TrainState:
    generator = build_generator(config.generator_config(), seed=config.seed)
    critic = build_critic(config.critic_config(), seed=config.seed + 1)
    teacher = build_teacher(config.m)
    gen_opt = torch.optim.Adam(
        generator.parameters(), lr=config.lr, betas=(config.beta1, config.beta2)
    )
    critic_opt = torch.optim.Adam(
        critic.parameters(), lr=config.lr, betas=(config.beta1, config.beta2)
    )
    rng = torch.Generator()
    rng.manual_seed(config.seed + 2)
    return TrainState(
        config=config,
        generator=generator,
        critic=critic,
        teacher=teacher,
        gen_opt=gen_opt,
        critic_opt=critic_opt,
        rng=rng,
        weights=config.effective_weights(),
    )


def _check_finite(report: LossReport, step: int) -> None:
    for name, value in report.values().items():
        if not math.isfinite(value):
            raise TrainingError(name, step)


def train_step(state: TrainState, batch: data.Batch) -> LossReport:
    """One alternating update; mutates ``state`` and returns the step report."""
    weights = state.weights
    L = torch.as_tensor(batch.input_L, dtype=torch.float32)
    real_ab = torch.as_tensor(batch.target_ab, dtype=torch.float32)
    real_lab = torch.cat([L.unsqueeze(-1), real_ab], dim=-1)

    teacher_dist = None
    if weights.lambda_s > 0:
        teacher_dist = teacher_forward(state.teacher, L)

    def critic_fn(lab):
        return discriminator_forward(state.critic, lab)

    critic_parts = {}
    if weights.lambda_g > 0:
        for _ in range(state.config.critic_steps_per_gen_step):
            with torch.no_grad():
                fake_ab = generator_forward(state.generator, L).ab
            fake_lab = torch.cat([L.unsqueeze(-1), fake_ab], dim=-1)
            state.critic_opt.zero_grad()
            total_critic, critic_parts = critic_objective(
                critic_fn, real_lab, fake_lab, weights, rng=state.rng
            )
            total_critic.backward()
            state.critic_opt.step()

    state.gen_opt.zero_grad()
    out = generator_forward(state.generator, L)
    fake_lab = None
    if weights.lambda_g > 0:
        fake_lab = torch.cat([L.unsqueeze(-1), out.ab], dim=-1)
    total_gen, report = generator_objective(
        out.ab,
        real_ab,
        out.class_dist,
        teacher_dist,
        critic_fn if weights.lambda_g > 0 else None,
        fake_lab,
        weights,
    )
    total_gen.backward()
    state.gen_opt.step()

    for name, value in critic_parts.items():
        setattr(report, name, value)
    state.step += 1
    _check_finite(report, state.step)
    return report


class MetricsLog:
    """Append-only TSV, one row per training step."""

    HEADER = ("step",) + LossReport.FIELDS

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.write_text("\t".join(self.HEADER) + "\n")

    def append(self, step: int, report: LossReport) -> None:
        values = report.values()
        row = "\t".join([str(step)] + [repr(values[f]) for f in LossReport.FIELDS])
        with self.path.open("a") as fh:
            fh.write(row + "\n")


def load_metrics(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split("\t")
    rows = []
    for line in lines[1:]:
        cells = line.split("\t")
        row = {"step": int(cells[0])}
        row.update({k: float(v) for k, v in zip(header[1:], cells[1:])})
        rows.append(row)
    return rows


def fit(config: TrainConfig, corpus, out_dir, resume_from=None):
    """Train for ``config.epochs`` epochs over the corpus.

    Writes a metrics row per step and a checkpoint per epoch under
    ``out_dir``; returns ``(state, final_checkpoint_path, metrics_path)``.
    On resume, the checkpoint's config snapshot governs everything except
    the target epoch count, which is taken from ``config``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if resume_from is not None:
        state = load_checkpoint(resume_from)
        state.config = replace(state.config, epochs=config.epochs)
        config = state.config
    else:
        state = init_state(config)
    log = MetricsLog(out / "metrics.tsv")

    for epoch in range(state.epoch + 1, config.epochs + 1):
        epoch_seed = config.seed * 100003 + epoch
        batches = data.batch_iterator(
            corpus,
            config.batch_size,
            shuffle_seed=epoch_seed,
            side=config.side,
            workers=config.workers,
        )
        try:
            for batch in batches:
                report = train_step(state, batch)
                log.append(state.step, report)
        except RecolorError as exc:
            exc.args = (f"epoch {epoch}, step {state.step + 1}: {exc}",)
            raise
        state.epoch = epoch
        save_checkpoint(state, out / f"epoch_{epoch:04d}.pt")
    final_path = out / "checkpoint.pt"
    save_checkpoint(state, final_path)
    return state, final_path, log.path


def save_checkpoint(state: TrainState, path) -> None:
    """Atomic write of parameters, optimizer moments, counters, and RNG state."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "step": state.step,
        "epoch": state.epoch,
        "config": asdict(state.config),
        "generator": state.generator.state_dict(),
        "critic": state.critic.state_dict(),
        "teacher": state.teacher.state_dict(),
        "gen_opt": state.gen_opt.state_dict(),
        "critic_opt": state.critic_opt.state_dict(),
        "rng_state": state.rng.get_state(),
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path) -> TrainState:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot load checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version!r} (expected {CHECKPOINT_VERSION})"
        )
    config = _config_from_dict(payload["config"])
    state = init_state(config)
    state.generator.load_state_dict(payload["generator"])
    state.critic.load_state_dict(payload["critic"])
    state.teacher.load_state_dict(payload["teacher"])
    state.gen_opt.load_state_dict(payload["gen_opt"])
    state.critic_opt.load_state_dict(payload["critic_opt"])
    state.rng.set_state(payload["rng_state"])
    state.step = payload["step"]
    state.epoch = payload["epoch"]
    return state
