"""Self-supervised adversarial colorization: library, CLI, and study backend."""

from .colorspace import (
    LabImage,
    decode_chroma,
    decode_luminance,
    encode_chroma,
    encode_luminance,
    lab_to_rgb,
    rgb_to_lab,
    triplicate_luminance,
)
from .data import Batch, Sample, batch_iterator, prepare_sample
from .evaluation import EvalReport, Judgment, evaluate_model, naturalness, psnr_ab
from .losses import (
    LossReport,
    LossWeights,
    class_kl,
    color_error,
    critic_objective,
    generator_objective,
    gradient_penalty,
)
from .networks import (
    CriticConfig,
    Generator,
    GeneratorConfig,
    GeneratorOutput,
    ParameterPartition,
    PatchCritic,
    TeacherClassifier,
    build_critic,
    build_generator,
    build_teacher,
    discriminator_forward,
    generator_forward,
    init_weights,
    parameter_partition,
    save_backbone_weights,
    teacher_forward,
)
from .trainer import (
    TrainConfig,
    TrainState,
    fit,
    init_state,
    load_checkpoint,
    save_checkpoint,
    train_step,
)

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "CriticConfig",
    "EvalReport",
    "Generator",
    "GeneratorConfig",
    "GeneratorOutput",
    "Judgment",
    "LabImage",
    "LossReport",
    "LossWeights",
    "ParameterPartition",
    "PatchCritic",
    "Sample",
    "TeacherClassifier",
    "TrainConfig",
    "TrainState",
    "batch_iterator",
    "build_critic",
    "build_generator",
    "build_teacher",
    "class_kl",
    "color_error",
    "critic_objective",
    "decode_chroma",
    "decode_luminance",
    "discriminator_forward",
    "encode_chroma",
    "encode_luminance",
    "evaluate_model",
    "fit",
    "generator_forward",
    "generator_objective",
    "gradient_penalty",
    "init_state",
    "init_weights",
    "lab_to_rgb",
    "load_checkpoint",
    "naturalness",
    "parameter_partition",
    "prepare_sample",
    "psnr_ab",
    "rgb_to_lab",
    "save_backbone_weights",
    "save_checkpoint",
    "teacher_forward",
    "train_step",
    "triplicate_luminance",
]
