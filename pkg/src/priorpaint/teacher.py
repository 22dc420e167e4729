"""Frozen feature extractors that supervise the prior learner.

A teacher maps the enlarged full image (3, 2H, 2W) to a target feature map
(d, H/4, W/4), i.e. it downsamples its own input by 8. Teachers are never
trained here; the default is a seeded random convolutional stack that gives
a deterministic regression target without any external weights, and real
backbones can be plugged in through the registry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .exceptions import CheckpointError, ConfigurationError, DimensionError, UnsupportedBackboneError

TEACHER_STRIDE = 8  # relative to the 2x-enlarged input


@dataclass(frozen=True)
class TeacherSpec:
    """Identity and shape contract of a frozen teacher."""

    name: str
    channels: int
    native_stride: int = TEACHER_STRIDE
    seed: int | None = None
    weights_path: str | None = None


class FrozenTeacher(nn.Module):
    """Wraps a backbone, disables gradients, and fixes the output stride.

    If the backbone's native stride differs from 8, its feature map is
    bilinearly resampled to the stride-8 spatial size.
    """

    def __init__(self, backbone: nn.Module, spec: TeacherSpec):
        super().__init__()
        self.backbone = backbone
        self.spec = spec
        for p in self.backbone.parameters():
            p.requires_grad_(False)
        self.backbone.eval()

    def train(self, mode: bool = True):
        # Stay in eval mode even when a surrounding trainer flips modes.
        super().train(False)
        return self

    @property
    def channels(self) -> int:
        return self.spec.channels

    def forward(self, image_up: torch.Tensor) -> torch.Tensor:
        if image_up.shape[-1] % TEACHER_STRIDE or image_up.shape[-2] % TEACHER_STRIDE:
            raise DimensionError(
                f"teacher input spatial size {tuple(image_up.shape[-2:])} "
                f"is not divisible by {TEACHER_STRIDE}"
            )
        squeeze = image_up.dim() == 3
        x = image_up.unsqueeze(0) if squeeze else image_up
        with torch.no_grad():
            features = self.backbone(x)
            target_size = (x.shape[-2] // TEACHER_STRIDE, x.shape[-1] // TEACHER_STRIDE)
            if features.shape[-2:] != target_size:
                features = F.interpolate(
                    features, size=target_size, mode="bilinear", align_corners=False
                )
        return features.squeeze(0) if squeeze else features

    def state_bytes(self) -> bytes:
        """Serialized weights, used to assert the freeze invariant."""
        import io

        buf = io.BytesIO()
        torch.save(self.backbone.state_dict(), buf)
        return buf.getvalue()


def teacher_features(image_up: torch.Tensor, teacher: FrozenTeacher) -> torch.Tensor:
    """Supervision target for the prior learner; gradients are disabled."""
    return teacher(image_up)


# ---------------------------------------------------------------------------
# Backbone layouts
# ---------------------------------------------------------------------------

def _seeded_conv_stack(widths, seed: int) -> nn.Sequential:
    """Strided 4x4 conv stack with weights drawn from a private generator."""
    gen = torch.Generator().manual_seed(seed)
    layers = []
    in_ch = 3
    for i, out_ch in enumerate(widths):
        conv = nn.Conv2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1)
        fan_in = in_ch * 16
        std = math.sqrt(2.0 / fan_in)
        with torch.no_grad():
            conv.weight.normal_(0.0, std, generator=gen)
            conv.bias.zero_()
        layers.append(conv)
        if i < len(widths) - 1:
            layers.append(nn.LeakyReLU(0.2))
        in_ch = out_ch
    return nn.Sequential(*layers)


def _stride8_layout(channels: int, seed: int) -> nn.Module:
    return _seeded_conv_stack((32, 64, channels), seed)


def _stride16_layout(channels: int, seed: int) -> nn.Module:
    return _seeded_conv_stack((32, 64, 128, channels), seed)


@dataclass(frozen=True)
class BackboneEntry:
    builder: callable
    native_stride: int


# Registry of known backbone layouts. Entries build an untrained module of
# the right architecture; load_external_teacher fills it from a weight file.
BACKBONES = {
    "conv-stride8": BackboneEntry(_stride8_layout, 8),
    "conv-stride16": BackboneEntry(_stride16_layout, 16),
}


def register_backbone(name: str, builder, native_stride: int) -> None:
    BACKBONES[name] = BackboneEntry(builder, native_stride)


def build_standin_teacher(seed: int, channels: int = 64) -> FrozenTeacher:
    """Deterministic frozen teacher: three strided convs, x8 downsample."""
    if channels < 1:
        raise ConfigurationError("teacher channel count must be >= 1")
    spec = TeacherSpec(name="standin", channels=channels, native_stride=8, seed=seed)
    return FrozenTeacher(_stride8_layout(channels, seed), spec)


def build_alt_teacher(seed: int, channels: int = 64) -> FrozenTeacher:
    """Alternative frozen teacher with native stride 16, resampled to 8.

    Used by the teacher-swap ablation; exercises the resampling adapter.
    """
    spec = TeacherSpec(name="standin-alt", channels=channels, native_stride=16, seed=seed)
    return FrozenTeacher(_stride16_layout(channels, seed), spec)


def load_external_teacher(weights_path, layout: str, channels: int) -> FrozenTeacher:
    """Load a frozen teacher from a weight file with a registered layout."""
    if layout not in BACKBONES:
        raise UnsupportedBackboneError(
            f"unknown backbone layout {layout!r}; registered: {sorted(BACKBONES)}"
        )
    entry = BACKBONES[layout]
    backbone = entry.builder(channels, seed=0)
    try:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
    except FileNotFoundError as exc:
        raise CheckpointError(f"teacher weight file not found: {weights_path}") from exc
    except Exception as exc:
        raise CheckpointError(f"could not read teacher weights {weights_path}: {exc}") from exc
    try:
        backbone.load_state_dict(state)
    except RuntimeError as exc:
        raise ConfigurationError(
            f"teacher weights {weights_path} do not match layout {layout!r} "
            f"with {channels} output channels: {exc}"
        ) from exc
    spec = TeacherSpec(
        name=layout, channels=channels,
        native_stride=entry.native_stride, weights_path=str(weights_path),
    )
    return FrozenTeacher(backbone, spec)


def build_teacher(name: str, seed: int, channels: int, weights_path=None) -> FrozenTeacher:
    """Resolve a teacher from configuration."""
    if name == "standin":
        return build_standin_teacher(seed, channels)
    if name == "standin-alt":
        return build_alt_teacher(seed, channels)
    if weights_path is None:
        raise ConfigurationError(
            f"teacher {name!r} needs a weights path (only the stand-ins are weight-free)"
        )
    return load_external_teacher(weights_path, name, channels)
