"""Dual-headed generator, patch critic, and frozen teacher classifier.

The generator shares a convolutional backbone between two heads: a color
head regressing encoded chrominance at full resolution, and a class head
emitting a softmax distribution over ``m`` semantic categories. The class
trunk's 256-d feature vector is broadcast across the spatial grid and
fused into the color path, so the color loss reaches every parameter
group while the class loss touches only the backbone and class branch.

Public forward helpers use channels-last layouts (``(N, H, W)`` luminance
in, ``(N, H, W, 2)`` chrominance out); the modules themselves are plain
channels-first torch networks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .errors import ConfigError, FormatError, PartitionError, WeightLoadError

GENERATOR_GROUPS = ("shared", "color_branch", "class_branch", "fusion")

# Fixed seed for the frozen desk-scale teacher, independent of run seeds.
TEACHER_SEED = 1729


@dataclass
class GeneratorConfig:
    input_side: int = 224
    num_classes: int = 1000
    backbone_depth: int = 4  # stages used from the width ladder; pool after all but the last
    backbone_widths: tuple = (64, 128, 256, 512)
    backbone_convs: tuple = (2, 2, 3, 3)
    color_widths: tuple = (256, 128)
    class_conv_widths: tuple = (512, 512, 512, 512)
    class_conv_strides: tuple = (2, 1, 2, 1)
    fc_widths: tuple = (1024, 512, 256)
    head_widths: tuple = (128, 64, 64, 32, 32, 16)

    def __post_init__(self):
        if self.input_side % 8 != 0:
            raise ConfigError(f"input_side must be divisible by 8, got {self.input_side}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.backbone_depth != len(self.backbone_widths) or self.backbone_depth != len(
            self.backbone_convs
        ):
            raise ConfigError("backbone_depth must match the width/conv ladders")
        if 2 ** (self.backbone_depth - 1) != 8:
            raise ConfigError("backbone must end at 1/8 spatial resolution")
        if len(self.class_conv_widths) != len(self.class_conv_strides):
            raise ConfigError("class conv widths and strides must align")
        if len(self.color_widths) != 2 or len(self.head_widths) != 6:
            raise ConfigError("color branch takes 2 modules and the fusion head takes 6")

    @classmethod
    def desk(cls, input_side: int = 64, num_classes: int = 10) -> "GeneratorConfig":
        """Small widths for CPU-scale runs; same topology as the default."""
        return cls(
            input_side=input_side,
            num_classes=num_classes,
            backbone_widths=(16, 32, 64, 128),
            backbone_convs=(1, 1, 2, 2),
            color_widths=(64, 32),
            class_conv_widths=(128, 128, 128, 128),
            head_widths=(64, 32, 32, 16, 16, 8),
        )


@dataclass
class CriticConfig:
    input_side: int = 224
    widths: tuple = (64, 128, 256, 512)

    def __post_init__(self):
        if self.input_side % 8 != 0:
            raise ConfigError(f"input_side must be divisible by 8, got {self.input_side}")
        if len(self.widths) != 4:
            raise ConfigError("critic takes four convolution widths")

    @classmethod
    def desk(cls, input_side: int = 64) -> "CriticConfig":
        return cls(input_side=input_side, widths=(32, 64, 128, 128))

    @classmethod
    def tiny(cls, input_side: int = 16) -> "CriticConfig":
        """Under 1k parameters; used by finite-difference gradient checks."""
        return cls(input_side=input_side, widths=(2, 2, 4, 4))


@dataclass
class GeneratorOutput:
    ab: torch.Tensor  # (N, H, W, 2), encoded chrominance
    class_dist: torch.Tensor  # (N, m), rows sum to 1


def _conv_bn_relu(cin, cout, stride=1):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class Generator(nn.Module):
    """Maps an encoded luminance batch to chrominance and a class distribution."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config

        layers = []
        cin = 1
        for stage, (width, n_convs) in enumerate(
            zip(config.backbone_widths, config.backbone_convs)
        ):
            for _ in range(n_convs):
                layers += [nn.Conv2d(cin, width, 3, padding=1), nn.ReLU(inplace=True)]
                cin = width
            if stage < config.backbone_depth - 1:
                layers.append(nn.MaxPool2d(2))
        self.backbone = nn.Sequential(*layers)
        backbone_out = config.backbone_widths[-1]

        c1, c2 = config.color_widths
        self.color_branch = nn.Sequential(
            _conv_bn_relu(backbone_out, c1), _conv_bn_relu(c1, c2)
        )

        trunk = []
        cin = backbone_out
        grid = config.input_side // 8
        for width, stride in zip(config.class_conv_widths, config.class_conv_strides):
            trunk.append(_conv_bn_relu(cin, width, stride=stride))
            cin = width
            if stride == 2:
                grid = (grid + 1) // 2
        self.class_trunk = nn.Sequential(*trunk)

        fcs = [nn.Flatten()]
        fin = grid * grid * cin
        for width in config.fc_widths:
            fcs += [nn.Linear(fin, width), nn.ReLU(inplace=True)]
            fin = width
        self.class_fc = nn.Sequential(*fcs)
        self.class_head = nn.Linear(fin, config.num_classes)

        head = []
        cin = c2 + config.fc_widths[-1]
        for i, width in enumerate(config.head_widths):
            head += [nn.Conv2d(cin, width, 3, padding=1), nn.ReLU(inplace=True)]
            cin = width
            if i in (1, 3):  # 2x upsampling after modules 2 and 4
                head.append(nn.Upsample(scale_factor=2, mode="nearest"))
        head += [nn.Conv2d(cin, 2, 3, padding=1), nn.Tanh()]
        self.fusion_head = nn.Sequential(*head)

    def forward(self, x: torch.Tensor):
        """``x``: (N, 1, side, side) encoded luminance.

        Returns ``(ab, class_dist)`` with ab (N, 2, side, side) in [-1, 1].
        """
        features = self.backbone(x)
        color = self.color_branch(features)
        vec = self.class_fc(self.class_trunk(features))
        class_dist = torch.softmax(self.class_head(vec), dim=1)

        grid = vec[:, :, None, None].expand(-1, -1, color.shape[2], color.shape[3])
        fused = torch.cat([color, grid], dim=1)
        ab_half = self.fusion_head(fused)
        # fixed non-learned resize from side/2 back to full resolution
        ab = F.interpolate(ab_half, scale_factor=2, mode="bilinear", align_corners=False)
        return ab, class_dist


class PatchCritic(nn.Module):
    """Scores each local patch of a Lab stack; one value per 8x8 input patch.

    No saturating nonlinearity on the output: this is a Wasserstein critic,
    not a classifier.
    """

    def __init__(self, config: CriticConfig):
        super().__init__()
        self.config = config
        w1, w2, w3, w4 = config.widths
        self.model = nn.Sequential(
            nn.Conv2d(3, w1, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w1, w2, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w2, w3, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w3, w4, 3, stride=1, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w4, 1, 3, stride=1, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


class TeacherClassifier(nn.Module):
    """Frozen desk-scale classifier providing the class-distribution target.

    Deterministically initialized from TEACHER_SEED; its parameters never
    receive gradients. Consumes triplicated encoded luminance.
    """

    def __init__(self, num_classes: int):
        super().__init__()
        self.model = nn.Sequential(
            nn.Conv2d(3, 8, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(8, 16, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(16, num_classes),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.model(x), dim=1)


@dataclass
class ParameterPartition:
    """Named, disjoint parameter groups for gradient-routing checks."""

    shared: dict = field(default_factory=dict)
    color_branch: dict = field(default_factory=dict)
    class_branch: dict = field(default_factory=dict)
    fusion: dict = field(default_factory=dict)
    critic: dict = field(default_factory=dict)

    def generator_groups(self) -> dict:
        return {name: getattr(self, name) for name in GENERATOR_GROUPS}

    def total_parameters(self) -> int:
        groups = list(self.generator_groups().values()) + [self.critic]
        return sum(p.numel() for g in groups for p in g.values())


_GROUP_PREFIXES = {
    "backbone.": "shared",
    "color_branch.": "color_branch",
    "class_trunk.": "class_branch",
    "class_fc.": "class_branch",
    "class_head.": "class_branch",
    "fusion_head.": "fusion",
}


def parameter_partition(generator: Generator, critic: PatchCritic | None = None) -> ParameterPartition:
    """Assign every parameter to exactly one named group."""
    part = ParameterPartition()
    for name, param in generator.named_parameters():
        matches = [g for prefix, g in _GROUP_PREFIXES.items() if name.startswith(prefix)]
        if len(matches) != 1:
            raise PartitionError(f"generator parameter '{name}' matched groups {matches}")
        getattr(part, matches[0])[name] = param
    if critic is not None:
        part.critic = dict(critic.named_parameters())
    total = sum(1 for _ in generator.named_parameters())
    assigned = sum(len(g) for g in part.generator_groups().values())
    if assigned != total:
        raise PartitionError(f"assigned {assigned} of {total} generator parameters")
    return part


def _seeded(builder, seed):
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return builder()


def build_generator(config: GeneratorConfig, seed: int = 0,
                    backbone_weights=None) -> Generator:
    model = _seeded(lambda: Generator(config), seed)
    return init_weights(model, backbone_weights)


def build_critic(config: CriticConfig, seed: int = 0) -> PatchCritic:
    return _seeded(lambda: PatchCritic(config), seed)


def build_teacher(num_classes: int, seed: int = TEACHER_SEED) -> TeacherClassifier:
    model = _seeded(lambda: TeacherClassifier(num_classes), seed)
    for p in model.parameters():
        p.requires_grad_(False)
    return model.eval()


def init_weights(model: Generator, backbone_weights=None) -> Generator:
    """Overlay backbone parameters from a weight archive, if given.

    The archive is an ``.npz`` of named arrays keyed by the backbone's
    parameter names (as written by :func:`save_backbone_weights`); names,
    shapes, and dtypes must all match. The backbone stays trainable.
    """
    if backbone_weights is None:
        return model
    archive = np.load(backbone_weights)
    seen = set()
    with torch.no_grad():
        for name, param in model.backbone.named_parameters(prefix="backbone"):
            if name not in archive:
                raise WeightLoadError(f"weight file is missing layer '{name}'")
            stored = archive[name]
            if tuple(stored.shape) != tuple(param.shape):
                raise WeightLoadError(
                    f"layer '{name}' has shape {tuple(param.shape)}, file has {tuple(stored.shape)}"
                )
            param.copy_(torch.from_numpy(np.asarray(stored)))
            seen.add(name)
    extra = sorted(set(archive.files) - seen)
    if extra:
        raise WeightLoadError(f"weight file has unknown layers: {extra[:3]}")
    return model


def save_backbone_weights(model: Generator, path) -> None:
    arrays = {
        name: param.detach().cpu().numpy()
        for name, param in model.backbone.named_parameters(prefix="backbone")
    }
    np.savez(path, **arrays)


def _as_tensor(value, name):
    if isinstance(value, torch.Tensor):
        return value
    return torch.as_tensor(np.asarray(value), dtype=torch.float32)


def generator_forward(generator: Generator, L_batch) -> GeneratorOutput:
    """Run the generator on ``(N, side, side)`` encoded luminance."""
    L = _as_tensor(L_batch, "L_batch")
    side = generator.config.input_side
    if L.ndim != 3 or L.shape[1] != side or L.shape[2] != side:
        raise FormatError(
            f"expected luminance batch (N, {side}, {side}), got {tuple(L.shape)}"
        )
    ab, class_dist = generator(L.unsqueeze(1))
    return GeneratorOutput(ab=ab.permute(0, 2, 3, 1), class_dist=class_dist)


def discriminator_forward(critic: PatchCritic, lab_batch) -> torch.Tensor:
    """Score a ``(N, side, side, 3)`` encoded Lab stack; returns (N, side/8, side/8)."""
    lab = _as_tensor(lab_batch, "lab_batch")
    if lab.ndim != 4 or lab.shape[-1] != 3:
        raise FormatError(f"expected Lab batch (N, H, W, 3), got {tuple(lab.shape)}")
    return critic(lab.permute(0, 3, 1, 2)).squeeze(1)


def teacher_forward(teacher: TeacherClassifier, L_batch) -> torch.Tensor:
    """Frozen teacher distribution for ``(N, H, W)`` encoded luminance."""
    L = _as_tensor(L_batch, "L_batch")
    if L.ndim != 3:
        raise FormatError(f"expected luminance batch (N, H, W), got {tuple(L.shape)}")
    with torch.no_grad():
        return teacher(L.unsqueeze(1).expand(-1, 3, -1, -1))
