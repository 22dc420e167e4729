import numpy as np
import pytest
import torch

from priorpaint.networks import InpaintingModel, ModelConfig, PatchDiscriminator


@pytest.fixture(autouse=True)
def _seed_everything():
    torch.manual_seed(0)
    np.random.seed(0)


TINY = ModelConfig(
    feature_width=32, teacher_channels=16, spade_blocks=2,
    spade_hidden=16, prior_res_blocks=2, disc_base_width=8,
)


@pytest.fixture
def tiny_config():
    return ModelConfig(**vars(TINY))


@pytest.fixture
def tiny_model(tiny_config):
    torch.manual_seed(0)
    return InpaintingModel(tiny_config)


@pytest.fixture
def tiny_discriminator():
    torch.manual_seed(1)
    return PatchDiscriminator(8)


def random_sample(batch=2, size=32, seed=0, hole=0.25):
    from priorpaint.data import MaskedSample

    gen = torch.Generator().manual_seed(seed)
    image = torch.rand(batch, 3, size, size, generator=gen) * 2 - 1
    mask = (torch.rand(batch, 1, size, size, generator=gen) < hole).float()
    return MaskedSample.create(image, mask)


def finite_difference(fn, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Central-difference gradient of a scalar function, elementwise."""
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        hi = fn(x).item()
        flat[i] = orig - eps
        lo = fn(x).item()
        flat[i] = orig
        out[i] = (hi - lo) / (2 * eps)
    return grad


def max_relative_gradient_error(fn, x: torch.Tensor, eps: float = 1e-6) -> float:
    """Analytic-vs-numeric gradient discrepancy of a scalar function of x."""
    leaf = x.detach().clone().requires_grad_(True)
    fn(leaf).backward()
    analytic = leaf.grad.detach().clone()
    numeric = finite_difference(fn, x.detach().clone(), eps)
    denom = numeric.abs().clamp_min(1e-8)
    return ((analytic - numeric).abs() / denom).max().item()
