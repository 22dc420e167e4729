"""Image quality metrics on [0, 1]-range tensors.

PSNR uses an MSE floor of 1e-12 so identical images report exactly 120 dB
instead of infinity. SSIM is the single-scale variant with an 11x11
Gaussian window (sigma 1.5), C1=0.01^2 and C2=0.03^2 for unit dynamic
range, computed per channel over valid window positions and averaged.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F

from .exceptions import ConfigurationError, DimensionError

PSNR_MSE_FLOOR = 1e-12
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def to_unit_range(image: torch.Tensor) -> torch.Tensor:
    """Map a [-1, 1] image to [0, 1] with clamping."""
    return ((image + 1.0) / 2.0).clamp(0.0, 1.0)


def _as_batched(image: torch.Tensor) -> torch.Tensor:
    if image.dim() == 3:
        return image.unsqueeze(0)
    if image.dim() == 4:
        return image
    raise DimensionError(f"expected a (C,H,W) or (B,C,H,W) image, got {tuple(image.shape)}")


def _check_pair(reference: torch.Tensor, candidate: torch.Tensor):
    if reference.shape != candidate.shape:
        raise DimensionError(
            f"metric inputs differ in shape: {tuple(reference.shape)} vs {tuple(candidate.shape)}"
        )


def mae(reference: torch.Tensor, candidate: torch.Tensor) -> float:
    """Mean absolute difference over all pixels and channels."""
    _check_pair(reference, candidate)
    return float((reference.double() - candidate.double()).abs().mean().item())


def psnr(reference: torch.Tensor, candidate: torch.Tensor) -> float:
    """Peak signal-to-noise ratio in decibels for unit-range images."""
    _check_pair(reference, candidate)
    mse = float(((reference.double() - candidate.double()) ** 2).mean().item())
    return 10.0 * math.log10(1.0 / max(mse, PSNR_MSE_FLOOR))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> torch.Tensor:
    """Normalized 2-D Gaussian kernel of the given size."""
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    window = torch.outer(g, g)
    return window / window.sum()


def ssim(reference: torch.Tensor, candidate: torch.Tensor) -> float:
    """Structural similarity, averaged over channels and valid positions."""
    _check_pair(reference, candidate)
    x = _as_batched(reference).double()
    y = _as_batched(candidate).double()
    if x.shape[-1] < SSIM_WINDOW or x.shape[-2] < SSIM_WINDOW:
        raise ConfigurationError(
            f"image {tuple(x.shape[-2:])} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    channels = x.shape[1]
    kernel = gaussian_window().expand(channels, 1, SSIM_WINDOW, SSIM_WINDOW)

    def local_mean(t):
        return F.conv2d(t, kernel, groups=channels)

    mu_x = local_mean(x)
    mu_y = local_mean(y)
    var_x = local_mean(x * x) - mu_x**2
    var_y = local_mean(y * y) - mu_y**2
    cov_xy = local_mean(x * y) - mu_x * mu_y

    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov_xy + SSIM_C2)
    den = (mu_x**2 + mu_y**2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float((num / den).mean().item())
