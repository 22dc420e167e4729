"""Alternating generator/discriminator optimization with seeded reproducibility.

One discriminator step on detached outputs, then one generator-side step
per batch. Both optimizers are Adam with betas (0.0, 0.9); the learning
rate steps from its initial value down to the fine-tune value at a
per-dataset decay epoch. Checkpoints restore training bit-exactly.
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass, asdict

import numpy as np
import torch

from .data import MaskedSample, resize_mask_nearest
from .exceptions import CheckpointError, ConfigurationError, DivergenceError
from .losses import (
    LossConfig,
    LossReport,
    discriminator_adv_loss,
    generator_adv_loss,
    prior_loss,
    reconstruction_loss,
    total_loss,
)
from .networks import InpaintingModel, ModelConfig, PatchDiscriminator
from .teacher import FrozenTeacher, TeacherSpec, build_teacher

CHECKPOINT_SCHEMA_VERSION = 1

# Learning-rate decay points reported per dataset; "desk" is a CPU-sized
# preset for development and the test suite.
DATASET_PROFILES = {
    "places2": {"decay_epoch": 30, "finetune_epochs": 10},
    "celeba": {"decay_epoch": 30, "finetune_epochs": 10},
    "streetview": {"decay_epoch": 50, "finetune_epochs": 20},
    "desk": {"decay_epoch": 30, "finetune_epochs": 10, "batch_size": 4},
}


@dataclass
class TrainConfig:
    seed: int = 0
    batch_size: int = 8
    lr: float = 1e-4
    lr_finetune: float = 1e-5
    beta1: float = 0.0
    beta2: float = 0.9
    decay_epoch: int = 30
    finetune_epochs: int = 10
    max_steps: int | None = None     # stop early after this many steps
    epochs: int | None = None        # override decay_epoch + finetune_epochs
    device: str = "cpu"
    fill: float = 0.0

    def validate(self):
        if self.lr_finetune >= self.lr:
            raise ConfigurationError("lr_finetune must be smaller than lr")
        if self.decay_epoch < 1:
            raise ConfigurationError("decay_epoch must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        return self

    @property
    def total_epochs(self) -> int:
        return self.decay_epoch + self.finetune_epochs

    def to_dict(self):
        return asdict(self)


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """Step decay: initial rate before decay_epoch, fine-tune rate after."""
    if epoch < 0:
        raise ConfigurationError("epoch must be >= 0")
    return config.lr if epoch < config.decay_epoch else config.lr_finetune


# ---------------------------------------------------------------------------
# Training data
# ---------------------------------------------------------------------------

class TrainingData:
    """Image tensor plus a deterministic per-(epoch, index) mask source."""

    def __init__(self, images: torch.Tensor, mask_fn, fixed: bool):
        self.images = images
        self._mask_fn = mask_fn
        self.fixed = fixed

    def __len__(self):
        return self.images.shape[0]

    def mask_for(self, epoch: int, index: int) -> torch.Tensor:
        return self._mask_fn(epoch, index)

    @classmethod
    def with_fixed_masks(cls, images: torch.Tensor, masks):
        """One mask per image, held across epochs (overfit protocols)."""
        masks = list(masks)
        if len(masks) != images.shape[0]:
            raise ConfigurationError("need exactly one mask per image")
        return cls(images, lambda epoch, index: masks[index], fixed=True)

    @classmethod
    def with_mask_pool(cls, images: torch.Tensor, masks, seed: int):
        """Fresh pool pick per epoch and image, deterministic under the seed."""
        masks = list(masks)
        if not masks:
            raise ConfigurationError("mask pool is empty")

        def pick(epoch, index):
            rng = np.random.default_rng(np.random.SeedSequence([seed, epoch, index]))
            return masks[int(rng.integers(len(masks)))]

        return cls(images, pick, fixed=False)


def batch_schedule(n_items: int, batch_size: int, seed: int, epoch: int):
    """Seeded permutation of item indices, chunked into batches."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    order = rng.permutation(n_items)
    return [order[i : i + batch_size].tolist() for i in range(0, n_items, batch_size)]


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------

def _tensor_digest(*tensors) -> str:
    h = hashlib.sha256()
    for t in tensors:
        h.update(t.detach().cpu().numpy().tobytes())
    return h.hexdigest()[:16]


class Trainer:
    """Owns the mutable training state: model, discriminator, optimizers."""

    def __init__(
        self,
        model: InpaintingModel,
        discriminator: PatchDiscriminator,
        teacher: FrozenTeacher,
        loss_config: LossConfig,
        train_config: TrainConfig,
    ):
        loss_config.validate()
        train_config.validate()
        if model.config.use_prior != loss_config.use_prior:
            raise ConfigurationError("model and loss disagree on use_prior")
        self.model = model.to(train_config.device)
        self.discriminator = discriminator.to(train_config.device)
        self.teacher = teacher.to(train_config.device)
        self.loss_config = loss_config
        self.config = train_config
        self.g_optimizer = torch.optim.Adam(
            self.model.parameters(), lr=train_config.lr,
            betas=(train_config.beta1, train_config.beta2),
        )
        self.d_optimizer = torch.optim.Adam(
            self.discriminator.parameters(), lr=train_config.lr,
            betas=(train_config.beta1, train_config.beta2),
        )
        self.epoch = 0
        self.global_step = 0
        self.current_lr = train_config.lr

    def _apply_lr(self, lr: float) -> None:
        self.current_lr = lr
        for opt in (self.g_optimizer, self.d_optimizer):
            for group in opt.param_groups:
                group["lr"] = lr

    def train_step(self, sample: MaskedSample) -> LossReport:
        """One discriminator update, then one generator-side update."""
        self.model.train()
        self.discriminator.train()
        output, prior, adapted = self.model(sample)

        # Discriminator sees real images against detached generator output.
        real_scores = self.discriminator(sample.image)
        fake_scores_detached = self.discriminator(output.detach())
        d_loss = discriminator_adv_loss(real_scores, fake_scores_detached)
        self.d_optimizer.zero_grad(set_to_none=True)
        d_loss.backward()
        self.d_optimizer.step()

        # Generator-side update against the weighted objective.
        l_img = reconstruction_loss(
            sample.image, output, sample.mask, self.loss_config.image_hole_weight
        )
        l_adv_g = generator_adv_loss(
            self.discriminator(output), self.loss_config.gan_variant
        )
        if self.loss_config.use_prior:
            target = self.teacher(sample.image_up)
            mask_small = resize_mask_nearest(sample.mask, adapted.shape[-2:])
            l_prior = prior_loss(
                target, adapted, mask_small, self.loss_config.prior_hole_weight
            )
        else:
            l_prior = torch.zeros((), device=output.device)

        try:
            objective, report = total_loss(l_img, l_adv_g, l_prior, d_loss, self.loss_config)
        except DivergenceError as exc:
            exc.diagnostics["step"] = self.global_step
            exc.diagnostics["inputs_digest"] = _tensor_digest(sample.image, sample.mask)
            raise
        self.g_optimizer.zero_grad(set_to_none=True)
        objective.backward()
        self.g_optimizer.step()

        self.global_step += 1
        return report

    def fit(self, data: TrainingData, max_steps=None, epochs=None, log_fh=None):
        """Run epochs (or until max_steps) over the data; returns the reports.

        The batch order and every mask are pure functions of (seed, epoch,
        index), so two runs with the same configuration produce identical
        loss streams and a resumed run continues the interrupted one
        exactly.
        """
        if max_steps is None:
            max_steps = self.config.max_steps
        if epochs is None:
            epochs = self.config.epochs
        if max_steps is None and epochs is None:
            epochs = self.config.total_epochs
        reports = []
        if log_fh is not None and self.global_step == 0:
            log_fh.write(",".join(LossReport.CSV_COLUMNS) + "\n")
        while True:
            if epochs is not None and self.epoch >= epochs:
                break
            if max_steps is not None and self.global_step >= max_steps:
                break
            self._apply_lr(lr_schedule(self.epoch, self.config))
            schedule = batch_schedule(
                len(data), self.config.batch_size, self.config.seed, self.epoch
            )
            steps_per_epoch = len(schedule)
            # Offset within the epoch; nonzero when resuming a checkpoint
            # that was saved mid-epoch.
            start = self.global_step - self.epoch * steps_per_epoch
            if start == steps_per_epoch:
                self.epoch += 1
                continue
            if not 0 <= start < steps_per_epoch:
                raise CheckpointError(
                    f"step counter {self.global_step} inconsistent with epoch "
                    f"{self.epoch} of {steps_per_epoch} steps"
                )
            for batch_index in range(start, steps_per_epoch):
                if max_steps is not None and self.global_step >= max_steps:
                    return reports
                indices = schedule[batch_index]
                images = data.images[indices].to(self.config.device)
                masks = torch.stack([data.mask_for(self.epoch, i) for i in indices])
                sample = MaskedSample.create(images, masks, self.config.fill).to(
                    self.config.device
                )
                report = self.train_step(sample)
                reports.append(report)
                if log_fh is not None:
                    log_fh.write(report.csv_row(self.global_step, self.current_lr) + "\n")
            self.epoch += 1
        return reports

    # -- checkpointing ------------------------------------------------------

    def save(self, path) -> None:
        """Atomically write the full training state."""
        state_blobs = {
            "model": self.model.state_dict(),
            "discriminator": self.discriminator.state_dict(),
        }
        manifest = {
            f"{module}.{name}": (str(t.dtype), tuple(t.shape))
            for module, blob in state_blobs.items()
            for name, t in blob.items()
        }
        payload = {
            "schema_version": CHECKPOINT_SCHEMA_VERSION,
            "model_config": self.model.config.to_dict(),
            "loss_config": self.loss_config.to_dict(),
            "train_config": self.config.to_dict(),
            "teacher_spec": asdict(self.teacher.spec),
            "teacher_state": self.teacher.backbone.state_dict(),
            "g_optimizer": self.g_optimizer.state_dict(),
            "d_optimizer": self.d_optimizer.state_dict(),
            "epoch": self.epoch,
            "global_step": self.global_step,
            "rng": {
                "torch": torch.get_rng_state(),
                "numpy": np.random.get_state(),
            },
            "manifest": manifest,
            **state_blobs,
        }
        tmp = f"{path}.tmp"
        torch.save(payload, tmp)
        os.replace(tmp, path)

    @staticmethod
    def _read(path) -> dict:
        try:
            payload = torch.load(path, map_location="cpu", weights_only=False)
        except FileNotFoundError as exc:
            raise CheckpointError(f"checkpoint not found: {path}") from exc
        except Exception as exc:
            raise CheckpointError(f"could not read checkpoint {path}: {exc}") from exc
        version = payload.get("schema_version")
        if version != CHECKPOINT_SCHEMA_VERSION:
            raise CheckpointError(
                f"checkpoint schema version {version!r} unsupported "
                f"(expected {CHECKPOINT_SCHEMA_VERSION})"
            )
        return payload

    @classmethod
    def load(cls, path, expect_model_config: ModelConfig | None = None) -> "Trainer":
        """Rebuild a trainer from a checkpoint; resumes bit-exactly."""
        payload = cls._read(path)
        model_config = ModelConfig(**payload["model_config"])
        if expect_model_config is not None and model_config != expect_model_config:
            raise ConfigurationError(
                "checkpoint model configuration does not match the expected one: "
                f"{model_config} vs {expect_model_config}"
            )
        model = InpaintingModel(model_config)
        model.load_state_dict(payload["model"])
        discriminator = PatchDiscriminator(model_config.disc_base_width)
        discriminator.load_state_dict(payload["discriminator"])
        teacher = _rebuild_teacher(payload)
        trainer = cls(
            model,
            discriminator,
            teacher,
            LossConfig(**payload["loss_config"]),
            TrainConfig(**payload["train_config"]),
        )
        trainer.g_optimizer.load_state_dict(payload["g_optimizer"])
        trainer.d_optimizer.load_state_dict(payload["d_optimizer"])
        trainer.epoch = payload["epoch"]
        trainer.global_step = payload["global_step"]
        torch.set_rng_state(payload["rng"]["torch"])
        np.random.set_state(payload["rng"]["numpy"])
        return trainer


def _rebuild_teacher(payload: dict) -> FrozenTeacher:
    spec = TeacherSpec(**payload["teacher_spec"])
    teacher = build_teacher(
        spec.name, seed=spec.seed if spec.seed is not None else 0,
        channels=spec.channels,
    )
    teacher.backbone.load_state_dict(payload["teacher_state"])
    return teacher


def load_model_for_eval(path):
    """Model, teacher, and configs from a checkpoint, in inference mode."""
    payload = Trainer._read(path)
    model_config = ModelConfig(**payload["model_config"])
    model = InpaintingModel(model_config)
    model.load_state_dict(payload["model"])
    model.eval()
    teacher = _rebuild_teacher(payload)
    return model, teacher, model_config, TrainConfig(**payload["train_config"])
