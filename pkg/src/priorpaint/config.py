"""Declarative run configuration: one YAML file fully determines a run.

Unknown keys are rejected rather than ignored, and dotted-key overrides
(``train.lr=2e-4``) are applied after the file so a run can be tweaked
from the command line without editing it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, asdict

import torch
import yaml

from .data import (
    BUCKETS,
    BUCKET_LABELS,
    ArrayImageSet,
    ImageFolder,
    MaskFolder,
    generate_irregular_mask,
    synthetic_images,
)
from .exceptions import ConfigurationError
from .losses import LossConfig
from .networks import InpaintingModel, ModelConfig, PatchDiscriminator
from .teacher import build_teacher
from .trainer import DATASET_PROFILES, TrainConfig, Trainer, TrainingData


@dataclass
class DataConfig:
    image_dir: str | None = None      # directory of PNG/JPEG training images
    synthetic_count: int = 0          # >0: use generated images instead of a directory
    image_size: int = 256
    center_crop: bool = False
    mask_dir: str | None = None       # directory of binary PNG masks; None: generate
    mask_pool_size: int = 64          # generated pool size
    mask_buckets: list = field(default_factory=lambda: list(BUCKET_LABELS[1:3]))
    mask_mode: str = "pool"           # "pool": resample per epoch; "fixed": one per image

    def validate(self):
        if self.image_size % 4:
            raise ConfigurationError("image_size must be divisible by 4")
        unknown = set(self.mask_buckets) - set(BUCKET_LABELS)
        if unknown:
            raise ConfigurationError(f"unknown mask buckets: {sorted(unknown)}")
        if self.mask_mode not in ("pool", "fixed"):
            raise ConfigurationError("mask_mode must be 'pool' or 'fixed'")
        if self.image_dir is None and self.synthetic_count <= 0:
            raise ConfigurationError("either image_dir or synthetic_count must be set")
        return self


@dataclass
class TeacherConfig:
    name: str = "standin"
    seed: int = 0
    channels: int = 64
    weights: str | None = None


@dataclass
class EvalConfig:
    composite: bool = True
    manifest: str | None = None       # existing pairing file; None: build one
    pairing_seed: int = 0
    image_dir: str | None = None      # defaults to the training image source
    mask_dir: str | None = None       # defaults to a generated pool
    mask_seed: int = 7000


@dataclass
class ExperimentConfig:
    profile: str | None = None
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self):
        self.data.validate()
        self.model.validate()
        self.loss.validate()
        self.train.validate()
        if self.model.use_prior != self.loss.use_prior:
            raise ConfigurationError(
                "model.use_prior and loss.use_prior disagree; set both for ablations"
            )
        if self.model.teacher_channels != self.teacher.channels:
            raise ConfigurationError(
                f"model.teacher_channels ({self.model.teacher_channels}) must equal "
                f"teacher.channels ({self.teacher.channels})"
            )
        return self

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "data": asdict(self.data),
            "model": asdict(self.model),
            "teacher": asdict(self.teacher),
            "loss": asdict(self.loss),
            "train": asdict(self.train),
            "eval": asdict(self.eval),
        }


# Extra knobs the desk preset adjusts beyond the learning-rate profile.
DESK_PRESET = {
    "data": {"synthetic_count": 16, "image_size": 64, "mask_mode": "fixed"},
    "model": {"feature_width": 64, "teacher_channels": 32,
              "spade_hidden": 32, "disc_base_width": 16},
    "teacher": {"channels": 32},
}

SECTION_TYPES = {
    "data": DataConfig,
    "model": ModelConfig,
    "teacher": TeacherConfig,
    "loss": LossConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def _apply_section(obj, values: dict, section: str) -> None:
    valid = {f.name for f in fields(obj)}
    for key, value in values.items():
        if key not in valid:
            raise ConfigurationError(f"unknown configuration key: {section}.{key}")
        if isinstance(value, list):
            value = list(value)
        setattr(obj, key, value)


def apply_tree(config: ExperimentConfig, tree: dict) -> None:
    """Apply a nested {section: {key: value}} mapping onto the config."""
    for section, values in tree.items():
        if section == "profile":
            config.profile = values
            continue
        if section not in SECTION_TYPES:
            raise ConfigurationError(f"unknown configuration section: {section}")
        if not isinstance(values, dict):
            raise ConfigurationError(f"section {section!r} must be a mapping")
        _apply_section(getattr(config, section), values, section)


def _apply_profile(config: ExperimentConfig, profile: str) -> None:
    if profile not in DATASET_PROFILES:
        raise ConfigurationError(
            f"unknown profile {profile!r}; available: {sorted(DATASET_PROFILES)}"
        )
    overrides = dict(DATASET_PROFILES[profile])
    _apply_section(config.train, overrides, "train")
    if profile == "desk":
        apply_tree(config, DESK_PRESET)
    config.profile = profile


def parse_override(item: str):
    """Parse one ``section.key=value`` item; values use YAML scalars."""
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} is not of the form key=value")
    dotted, raw = item.split("=", 1)
    parts = dotted.strip().split(".")
    if len(parts) != 2 and dotted.strip() != "profile":
        raise ConfigurationError(
            f"override key {dotted!r} must be 'profile' or 'section.key'"
        )
    value = yaml.safe_load(raw)
    return parts, value


def load_config(path=None, overrides=(), seed: int | None = None) -> ExperimentConfig:
    """Resolve defaults <- profile <- file <- overrides <- seed flag."""
    tree = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            tree = yaml.safe_load(fh) or {}
        if not isinstance(tree, dict):
            raise ConfigurationError(f"{path} does not contain a configuration mapping")

    config = ExperimentConfig()
    profile = tree.get("profile")
    for item in overrides:
        parts, value = parse_override(item)
        if parts == ["profile"]:
            profile = value
    if profile is not None:
        _apply_profile(config, profile)
    apply_tree(config, {k: v for k, v in tree.items() if k != "profile"})
    for item in overrides:
        parts, value = parse_override(item)
        if parts == ["profile"]:
            continue
        apply_tree(config, {parts[0]: {parts[1]: value}})
    if seed is not None:
        config.train.seed = seed
    return config.validate()


def dump_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_model(config: ExperimentConfig) -> InpaintingModel:
    torch.manual_seed(config.train.seed)
    return InpaintingModel(config.model)


def build_teacher_from(config: ExperimentConfig):
    return build_teacher(
        config.teacher.name,
        seed=config.teacher.seed,
        channels=config.teacher.channels,
        weights_path=config.teacher.weights,
    )


def build_image_source(config: ExperimentConfig):
    data = config.data
    if data.synthetic_count > 0:
        images = synthetic_images(data.synthetic_count, data.image_size, config.train.seed)
        return ArrayImageSet(images)
    return ImageFolder(data.image_dir, data.image_size, data.center_crop)


def build_mask_pool(config: ExperimentConfig, seed_offset: int = 0):
    data = config.data
    if data.mask_dir is not None:
        folder = MaskFolder(data.mask_dir)
        return [folder.mask(i) for i in folder.ids]
    buckets = [b for b in BUCKETS if b.label in data.mask_buckets]
    pool = []
    for i in range(data.mask_pool_size):
        bucket = buckets[i % len(buckets)]
        pool.append(
            generate_irregular_mask(
                config.train.seed + seed_offset + i, bucket,
                data.image_size, data.image_size,
            )
        )
    return pool


def build_training_data(config: ExperimentConfig) -> TrainingData:
    source = build_image_source(config)
    images = torch.stack([source.image(i) for i in source.ids])
    pool = build_mask_pool(config)
    if config.data.mask_mode == "fixed":
        masks = [pool[i % len(pool)] for i in range(len(images))]
        return TrainingData.with_fixed_masks(images, masks)
    return TrainingData.with_mask_pool(images, pool, config.train.seed)


def build_trainer(config: ExperimentConfig) -> Trainer:
    config.validate()
    model = build_model(config)
    discriminator = PatchDiscriminator(config.model.disc_base_width)
    teacher = build_teacher_from(config)
    return Trainer(model, discriminator, teacher, config.loss, config.train)
