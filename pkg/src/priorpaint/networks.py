"""Network components: encoders, prior adaptation, modulated decoder, discriminator.

Shape contract for input images of size (3, H, W) with H, W divisible by 4:

    image encoder   (corrupted, mask)        -> (c, H/4, W/4)
    prior learner   (corrupted_up, mask_up)  -> (c, H/4, W/4)   input is 2H x 2W
    prior adapter   (c, H/4, W/4)            -> (d, H/4, W/4)
    decoder         feature + prior          -> (3, H, W) in [-1, 1]
    discriminator   (3, H, W)                -> (1, H/16, W/16) scores in (0, 1)
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils import spectral_norm

from .data import MaskedSample
from .exceptions import ConfigurationError, DimensionError

INSTANCE_NORM_EPS = 1e-5


@dataclass
class ModelConfig:
    feature_width: int = 256        # c, channel width of both encoders
    teacher_channels: int = 64      # d, channel count of the supervision target
    spade_blocks: int = 8
    spade_hidden: int = 128
    prior_res_blocks: int = 5
    disc_base_width: int = 64
    use_spade: bool = True          # False: concatenate the prior once instead
    use_prior: bool = True          # False: drop the distillation loss term

    def validate(self):
        if self.feature_width < 4 or self.feature_width % 4:
            raise ConfigurationError("feature_width must be a positive multiple of 4")
        if self.teacher_channels < 1:
            raise ConfigurationError("teacher_channels must be >= 1")
        if self.spade_blocks < 1:
            raise ConfigurationError("spade_blocks must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)


def instance_normalize(feature: torch.Tensor, eps: float = INSTANCE_NORM_EPS) -> torch.Tensor:
    """Non-parametric instance normalization.

    Per sample and per channel: (x - mean) / sqrt(var + eps) with the biased
    (population) variance. No learned scale or shift.
    """
    dims = (-2, -1)
    mean = feature.mean(dim=dims, keepdim=True)
    var = feature.var(dim=dims, unbiased=False, keepdim=True)
    return (feature - mean) / torch.sqrt(var + eps)


class SPADE(nn.Module):
    """Spatially-adaptive modulation of an instance-normalized feature.

    A small network maps the conditioning map to per-pixel (gamma, beta);
    the output is gamma * IN(feature) + beta.
    """

    def __init__(self, feature_channels: int, cond_channels: int, hidden: int = 128):
        super().__init__()
        self.shared = nn.Sequential(
            nn.Conv2d(cond_channels, hidden, kernel_size=3, padding=1),
            nn.ReLU(),
        )
        self.to_gamma = nn.Conv2d(hidden, feature_channels, kernel_size=3, padding=1)
        self.to_beta = nn.Conv2d(hidden, feature_channels, kernel_size=3, padding=1)

    def modulation_params(self, cond: torch.Tensor):
        hidden = self.shared(cond)
        return self.to_gamma(hidden), self.to_beta(hidden)

    def forward(self, feature: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        if feature.shape[-2:] != cond.shape[-2:]:
            raise DimensionError(
                f"modulation misaligned: feature {tuple(feature.shape[-2:])} "
                f"vs conditioning {tuple(cond.shape[-2:])}"
            )
        gamma, beta = self.modulation_params(cond)
        return gamma * instance_normalize(feature) + beta


class SpadeResBlock(nn.Module):
    """Residual block whose normalizations are modulated by the prior.

    Two modulate -> activate -> conv stages plus a modulated 1x1 skip path.
    """

    def __init__(self, channels: int, cond_channels: int, hidden: int = 128):
        super().__init__()
        self.norm_0 = SPADE(channels, cond_channels, hidden)
        self.norm_1 = SPADE(channels, cond_channels, hidden)
        self.norm_s = SPADE(channels, cond_channels, hidden)
        self.conv_0 = nn.Sequential(
            nn.ReflectionPad2d(1), nn.Conv2d(channels, channels, kernel_size=3)
        )
        self.conv_1 = nn.Sequential(
            nn.ReflectionPad2d(1), nn.Conv2d(channels, channels, kernel_size=3)
        )
        self.conv_s = nn.Conv2d(channels, channels, kernel_size=1, bias=False)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        dx = self.conv_0(F.relu(self.norm_0(x, cond)))
        dx = self.conv_1(F.relu(self.norm_1(dx, cond)))
        return self.conv_s(self.norm_s(x, cond)) + dx


class PlainResBlock(nn.Module):
    """Unconditioned residual block: (pad-conv-IN-act) x2 with identity skip."""

    def __init__(self, channels: int, leaky: bool = False):
        super().__init__()
        act = nn.LeakyReLU(0.2) if leaky else nn.ReLU()
        self.body = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            nn.InstanceNorm2d(channels, track_running_stats=False),
            act,
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            nn.InstanceNorm2d(channels, track_running_stats=False),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class ImageEncoder(nn.Module):
    """Embeds (corrupted image, mask) into a stride-4 feature map.

    Wide 7x7 stem then two stride-2 convolutions; widths c/4 -> c/2 -> c.
    """

    def __init__(self, width: int):
        super().__init__()
        w4, w2 = width // 4, width // 2
        self.net = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(4, w4, kernel_size=7),
            nn.InstanceNorm2d(w4, track_running_stats=False),
            nn.LeakyReLU(0.2),
            nn.Conv2d(w4, w2, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(w2, track_running_stats=False),
            nn.LeakyReLU(0.2),
            nn.Conv2d(w2, width, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(width, track_running_stats=False),
            nn.LeakyReLU(0.2),
        )

    def forward(self, corrupted: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if corrupted.shape[-2:] != mask.shape[-2:]:
            raise DimensionError("image encoder inputs are spatially misaligned")
        if corrupted.shape[-1] % 4 or corrupted.shape[-2] % 4:
            raise DimensionError("image encoder input size must be divisible by 4")
        return self.net(torch.cat([corrupted, mask], dim=1))


class PriorLearner(nn.Module):
    """Predicts the semantic prior from the 2x-enlarged corrupted view.

    Three stride-2 convolutions followed by five residual blocks; total
    stride 8, so the output matches the image feature spatially.
    """

    def __init__(self, width: int, res_blocks: int = 5):
        super().__init__()
        w4, w2 = width // 4, width // 2
        stem = [
            nn.Conv2d(4, w4, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(w4, track_running_stats=False),
            nn.LeakyReLU(0.2),
            nn.Conv2d(w4, w2, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(w2, track_running_stats=False),
            nn.LeakyReLU(0.2),
            nn.Conv2d(w2, width, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(width, track_running_stats=False),
            nn.LeakyReLU(0.2),
        ]
        blocks = [PlainResBlock(width, leaky=True) for _ in range(res_blocks)]
        self.net = nn.Sequential(*stem, *blocks)

    def forward(self, corrupted_up: torch.Tensor, mask_up: torch.Tensor) -> torch.Tensor:
        if corrupted_up.shape[-2:] != mask_up.shape[-2:]:
            raise DimensionError("prior learner inputs are spatially misaligned")
        if corrupted_up.shape[-1] % 8 or corrupted_up.shape[-2] % 8:
            raise DimensionError("prior learner input size must be divisible by 8")
        return self.net(torch.cat([corrupted_up, mask_up], dim=1))


class PriorAdapter(nn.Module):
    """1x1 convolution mapping the prior onto the teacher's channel space."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size=1)

    def forward(self, prior: torch.Tensor) -> torch.Tensor:
        return self.conv(prior)


class Decoder(nn.Module):
    """Generates the output image from the feature map and the prior.

    With modulation enabled the prior conditions every residual block;
    otherwise it is concatenated once in front of plain residual blocks.
    Two nearest-neighbor x2 upsampling stages recover full resolution and a
    tanh keeps the output in [-1, 1].
    """

    def __init__(self, width: int, cond_channels: int, blocks: int = 8,
                 hidden: int = 128, use_spade: bool = True):
        super().__init__()
        self.use_spade = use_spade
        if use_spade:
            self.blocks = nn.ModuleList(
                [SpadeResBlock(width, cond_channels, hidden) for _ in range(blocks)]
            )
        else:
            self.fuse = nn.Conv2d(width + cond_channels, width, kernel_size=1)
            self.blocks = nn.ModuleList([PlainResBlock(width) for _ in range(blocks)])
        w4, w2 = width // 4, width // 2
        self.up_0 = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(width, w2, kernel_size=3, padding=1),
            nn.InstanceNorm2d(w2, track_running_stats=False),
            nn.ReLU(),
        )
        self.up_1 = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(w2, w4, kernel_size=3, padding=1),
            nn.InstanceNorm2d(w4, track_running_stats=False),
            nn.ReLU(),
        )
        self.to_rgb = nn.Sequential(
            nn.ReflectionPad2d(3), nn.Conv2d(w4, 3, kernel_size=7)
        )

    def forward(self, feature: torch.Tensor, prior: torch.Tensor) -> torch.Tensor:
        if feature.shape[-2:] != prior.shape[-2:]:
            raise DimensionError(
                f"decoder inputs misaligned: feature {tuple(feature.shape[-2:])} "
                f"vs prior {tuple(prior.shape[-2:])}"
            )
        if self.use_spade:
            x = feature
            for block in self.blocks:
                x = block(x, prior)
        else:
            x = self.fuse(torch.cat([feature, prior], dim=1))
            for block in self.blocks:
                x = block(x)
        x = self.up_1(self.up_0(x))
        return torch.tanh(self.to_rgb(x))


class PatchDiscriminator(nn.Module):
    """Spectrally-normalized convolutional stack emitting per-patch scores.

    Four stride-2 stages (total stride 16) and a 1-channel head with a
    sigmoid, so scores live in (0, 1).
    """

    def __init__(self, base_width: int = 64):
        super().__init__()
        w = base_width
        self.net = nn.Sequential(
            spectral_norm(nn.Conv2d(3, w, kernel_size=4, stride=2, padding=1, bias=False)),
            nn.LeakyReLU(0.2),
            spectral_norm(nn.Conv2d(w, 2 * w, kernel_size=4, stride=2, padding=1, bias=False)),
            nn.LeakyReLU(0.2),
            spectral_norm(nn.Conv2d(2 * w, 4 * w, kernel_size=4, stride=2, padding=1, bias=False)),
            nn.LeakyReLU(0.2),
            spectral_norm(nn.Conv2d(4 * w, 8 * w, kernel_size=4, stride=2, padding=1, bias=False)),
            nn.LeakyReLU(0.2),
            spectral_norm(nn.Conv2d(8 * w, 1, kernel_size=3, stride=1, padding=1, bias=False)),
        )

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.net(image))


class ModelOutput(NamedTuple):
    output: torch.Tensor      # (B, 3, H, W) in [-1, 1]
    prior: torch.Tensor       # (B, c, H/4, W/4)
    adapted: torch.Tensor     # (B, d, H/4, W/4)


class InpaintingModel(nn.Module):
    """Generator-side composition: encode, learn the prior, adapt, decode."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        c = config.feature_width
        self.image_encoder = ImageEncoder(c)
        self.prior_learner = PriorLearner(c, config.prior_res_blocks)
        self.prior_adapter = PriorAdapter(c, config.teacher_channels)
        self.decoder = Decoder(
            c, c, blocks=config.spade_blocks,
            hidden=config.spade_hidden, use_spade=config.use_spade,
        )
        self.apply(_init_conv_weights)

    def forward(self, sample: MaskedSample) -> ModelOutput:
        h, w = sample.image.shape[-2:]
        if sample.corrupted_up.shape[-2:] != (2 * h, 2 * w):
            raise DimensionError("sample's enlarged view is not exactly 2x the base view")
        feature = self.image_encoder(sample.corrupted, sample.mask)
        prior = self.prior_learner(sample.corrupted_up, sample.mask_up)
        adapted = self.prior_adapter(prior)
        output = self.decoder(feature, prior)
        return ModelOutput(output, prior, adapted)


def _init_conv_weights(module: nn.Module) -> None:
    if isinstance(module, nn.Conv2d):
        nn.init.normal_(module.weight, 0.0, 0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)


def composite(output: torch.Tensor, image: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Paste the generated content into the hole, keep original pixels elsewhere."""
    if output.shape[-2:] != image.shape[-2:] or image.shape[-2:] != mask.shape[-2:]:
        raise DimensionError("composite inputs are spatially misaligned")
    return output * mask + image * (1.0 - mask)
