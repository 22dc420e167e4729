"""Training objective: weighted L1 terms plus an adversarial pair.

All L1 norms are realized as means over elements so the weights stay
resolution-independent. Discriminator scores are clamped away from {0, 1}
before any log.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch

from .exceptions import ConfigurationError, DimensionError, DivergenceError

SCORE_CLAMP = 1e-7

GAN_VARIANTS = ("nonsaturating", "reversed")


@dataclass
class LossConfig:
    image_weight: float = 10.0       # weight of the reconstruction term
    adv_weight: float = 1.0          # weight of the generator's adversarial term
    prior_weight: float = 1.0        # weight of the prior distillation term
    prior_hole_weight: float = 3.0   # extra weight on missing regions in the prior term
    image_hole_weight: float = 5.0   # extra weight on missing regions in the image term
    gan_variant: str = "nonsaturating"
    use_prior: bool = True

    def validate(self):
        for name in ("image_weight", "adv_weight", "prior_weight",
                     "prior_hole_weight", "image_hole_weight"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if self.gan_variant not in GAN_VARIANTS:
            raise ConfigurationError(
                f"gan_variant must be one of {GAN_VARIANTS}, got {self.gan_variant!r}"
            )
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class LossReport:
    """Per-step scalar summary; total = 10*l_img + 1*l_adv_g + 1*l_prior by default."""

    l_img: float
    l_prior: float
    l_adv_g: float
    l_adv_d: float
    total: float

    CSV_COLUMNS = ("step", "l_img", "l_prior", "l_adv_g", "l_adv_d", "total", "lr")

    def csv_row(self, step: int, lr: float) -> str:
        return (
            f"{step},{self.l_img:.8f},{self.l_prior:.8f},{self.l_adv_g:.8f},"
            f"{self.l_adv_d:.8f},{self.total:.8f},{lr:.2e}"
        )


def _check_aligned(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(
            f"{what}: shapes misaligned, {tuple(a.shape)} vs {tuple(b.shape)}"
        )


def prior_loss(target: torch.Tensor, adapted: torch.Tensor,
               mask_small: torch.Tensor, hole_weight: float = 3.0) -> torch.Tensor:
    """Distillation regression with extra weight inside the hole.

    mean(|target - adapted| * (1 + hole_weight * mask_small)); the mask must
    already be resized (nearest-neighbor) to the feature's spatial size.
    """
    _check_aligned(target, adapted, "prior_loss")
    if target.shape != adapted.shape:
        raise DimensionError(
            f"prior_loss: channel mismatch, {tuple(target.shape)} vs {tuple(adapted.shape)}"
        )
    _check_aligned(target, mask_small, "prior_loss mask")
    weight = 1.0 + hole_weight * mask_small
    return ((target - adapted).abs() * weight).mean()


def reconstruction_loss(original: torch.Tensor, output: torch.Tensor,
                        mask: torch.Tensor, hole_weight: float = 5.0) -> torch.Tensor:
    """mean(|original - output| * (1 + hole_weight * mask)), mask broadcast over channels."""
    if original.shape != output.shape:
        raise DimensionError(
            f"reconstruction_loss: shapes differ, {tuple(original.shape)} vs {tuple(output.shape)}"
        )
    _check_aligned(original, mask, "reconstruction_loss mask")
    weight = 1.0 + hole_weight * mask
    return ((original - output).abs() * weight).mean()


def _clamped_log(scores: torch.Tensor) -> torch.Tensor:
    return torch.log(scores.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP))


def generator_adv_loss(fake_scores: torch.Tensor, variant: str = "nonsaturating") -> torch.Tensor:
    """Adversarial term for the generator update.

    "nonsaturating" (default) minimizes -mean(log D(fake)), rewarding the
    generator for fooling the discriminator. "reversed" minimizes
    -mean(log(1 - D(fake))) instead; its gradient direction rewards
    detectability and is kept only as an explicit opt-in.
    """
    if variant == "nonsaturating":
        return -_clamped_log(fake_scores).mean()
    if variant == "reversed":
        return -_clamped_log(1.0 - fake_scores).mean()
    raise ConfigurationError(f"unknown gan variant {variant!r}")


def discriminator_adv_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """Minimized discriminator objective: -mean(log D(real)) - mean(log(1 - D(fake)))."""
    return -_clamped_log(real_scores).mean() - _clamped_log(1.0 - fake_scores).mean()


def total_loss(l_img, l_adv_g, l_prior, l_adv_d, config: LossConfig):
    """Combine the weighted terms.

    Returns (objective, report): the objective is the tensor the generator
    update backpropagates; the report carries plain floats for logging.
    With use_prior disabled, the prior term is excluded and reported as 0.
    """
    l_img, l_adv_g, l_prior, l_adv_d = (
        x if torch.is_tensor(x) else torch.as_tensor(float(x))
        for x in (l_img, l_adv_g, l_prior, l_adv_d)
    )
    total = config.image_weight * l_img + config.adv_weight * l_adv_g
    prior_value = 0.0
    if config.use_prior:
        total = total + config.prior_weight * l_prior
        prior_value = float(l_prior.detach())

    report = LossReport(
        l_img=float(l_img.detach()),
        l_prior=prior_value,
        l_adv_g=float(l_adv_g.detach()),
        l_adv_d=float(l_adv_d.detach()),
        total=float(total.detach()),
    )
    for name, value in asdict(report).items():
        if not torch.isfinite(torch.as_tensor(value)):
            raise DivergenceError(
                f"non-finite loss component {name}", diagnostics=asdict(report)
            )
    return total, report
