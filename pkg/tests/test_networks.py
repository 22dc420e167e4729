import pytest
import torch
import torch.nn as nn

from conftest import random_sample
from priorpaint.data import MaskedSample
from priorpaint.exceptions import ConfigurationError, DimensionError
from priorpaint.losses import (
    LossConfig,
    generator_adv_loss,
    prior_loss,
    reconstruction_loss,
    total_loss,
)
from priorpaint.networks import (
    SPADE,
    Decoder,
    ImageEncoder,
    InpaintingModel,
    ModelConfig,
    PatchDiscriminator,
    PriorAdapter,
    PriorLearner,
    composite,
    instance_normalize,
)


def force_modulation(spade: SPADE, gamma: float, beta: float) -> None:
    """Zero the parameter network so it emits constant (gamma, beta)."""
    with torch.no_grad():
        for layer in (spade.shared[0], spade.to_gamma, spade.to_beta):
            layer.weight.zero_()
            layer.bias.zero_()
        spade.to_gamma.bias.fill_(gamma)
        spade.to_beta.bias.fill_(beta)


# ---------------------------------------------------------------------------
# instance normalization
# ---------------------------------------------------------------------------

def test_instance_normalize_standardizes_each_channel():
    x = torch.rand(2, 4, 8, 8) * 3 + 1
    out = instance_normalize(x)
    assert torch.allclose(out.mean(dim=(-2, -1)), torch.zeros(2, 4), atol=1e-4)
    assert torch.allclose(
        out.var(dim=(-2, -1), unbiased=False), torch.ones(2, 4), atol=1e-4
    )


def test_instance_normalize_constant_channel_maps_to_zero():
    # Tolerance covers float32 mean rounding amplified by 1/sqrt(eps).
    x = torch.full((1, 2, 4, 4), 3.7)
    assert torch.allclose(instance_normalize(x), torch.zeros_like(x), atol=1e-3)
    x64 = torch.full((1, 2, 4, 4), 3.7, dtype=torch.float64)
    assert torch.allclose(instance_normalize(x64), torch.zeros_like(x64), atol=1e-9)


def test_instance_normalize_hand_computed_values():
    x = torch.tensor([1.0, 2.0, 3.0, 4.0]).reshape(1, 1, 1, 4)
    out = instance_normalize(x).flatten()
    expected = torch.tensor([-1.3416, -0.4472, 0.4472, 1.3416])
    assert torch.allclose(out, expected, atol=1e-3)


# ---------------------------------------------------------------------------
# SPADE modulation
# ---------------------------------------------------------------------------

def test_identity_modulation_reduces_to_instance_norm():
    spade = SPADE(6, 4, hidden=8)
    force_modulation(spade, gamma=1.0, beta=0.0)
    feature = torch.rand(2, 6, 8, 8)
    prior = torch.rand(2, 4, 8, 8)
    assert torch.allclose(spade(feature, prior), instance_normalize(feature), atol=1e-6)


def test_saturated_modulation_overrides_content():
    spade = SPADE(6, 4, hidden=8)
    force_modulation(spade, gamma=0.0, beta=0.25)
    feature = torch.rand(2, 6, 8, 8)
    prior = torch.rand(2, 4, 8, 8)
    out = spade(feature, prior)
    assert torch.allclose(out, torch.full_like(out, 0.25), atol=1e-6)


def test_modulation_preserves_feature_shape():
    spade = SPADE(5, 3, hidden=8)
    for size in (4, 8, 12):
        feature = torch.rand(1, 5, size, size)
        prior = torch.rand(1, 3, size, size)
        assert spade(feature, prior).shape == feature.shape


def test_modulation_rejects_spatial_misalignment():
    spade = SPADE(5, 3, hidden=8)
    with pytest.raises(DimensionError):
        spade(torch.rand(1, 5, 8, 8), torch.rand(1, 3, 4, 4))


def test_forced_identity_makes_decoder_prior_independent(tiny_config):
    decoder = Decoder(
        tiny_config.feature_width, tiny_config.feature_width,
        blocks=tiny_config.spade_blocks, hidden=tiny_config.spade_hidden,
    )
    for block in decoder.blocks:
        for spade in (block.norm_0, block.norm_1, block.norm_s):
            force_modulation(spade, gamma=1.0, beta=0.0)
    feature = torch.rand(1, tiny_config.feature_width, 8, 8)
    out_a = decoder(feature, torch.rand(1, tiny_config.feature_width, 8, 8))
    out_b = decoder(feature, torch.rand(1, tiny_config.feature_width, 8, 8))
    assert torch.equal(out_a, out_b)


# ---------------------------------------------------------------------------
# encoders / adapter
# ---------------------------------------------------------------------------

def test_image_encoder_default_width_shape():
    encoder = ImageEncoder(256)
    out = encoder(torch.zeros(1, 3, 256, 256), torch.zeros(1, 1, 256, 256))
    assert out.shape == (1, 256, 64, 64)


def test_image_encoder_stride_arithmetic():
    encoder = ImageEncoder(32)
    out = encoder(torch.zeros(1, 3, 128, 128), torch.zeros(1, 1, 128, 128))
    assert out.shape == (1, 32, 32, 32)


def test_prior_learner_shape_and_alignment():
    learner = PriorLearner(32, res_blocks=2)
    out = learner(torch.zeros(1, 3, 512, 512), torch.zeros(1, 1, 512, 512))
    assert out.shape == (1, 32, 64, 64)

    encoder = ImageEncoder(32)
    feature = encoder(torch.zeros(1, 3, 256, 256), torch.zeros(1, 1, 256, 256))
    assert out.shape[-2:] == feature.shape[-2:]


def test_prior_learner_rejects_non_stride8_input():
    learner = PriorLearner(32, res_blocks=1)
    with pytest.raises(DimensionError):
        learner(torch.zeros(1, 3, 68, 68), torch.zeros(1, 1, 68, 68))


def test_encoders_are_deterministic_in_eval_mode(tiny_model):
    sample = random_sample()
    tiny_model.eval()
    with torch.no_grad():
        a = tiny_model(sample)
        b = tiny_model(sample)
    assert torch.equal(a.output, b.output)
    assert torch.equal(a.prior, b.prior)
    assert torch.equal(a.adapted, b.adapted)


def test_adapter_shape_rule():
    adapter = PriorAdapter(256, 512)
    out = adapter(torch.zeros(1, 256, 64, 64))
    assert out.shape == (1, 512, 64, 64)


def test_adapter_identity_configuration():
    adapter = PriorAdapter(8, 8)
    with torch.no_grad():
        adapter.conv.weight.copy_(torch.eye(8).reshape(8, 8, 1, 1))
        adapter.conv.bias.zero_()
    x = torch.rand(2, 8, 4, 4)
    assert torch.allclose(adapter(x), x, atol=1e-7)


# ---------------------------------------------------------------------------
# decoder / discriminator
# ---------------------------------------------------------------------------

def test_decoder_output_range_and_shape(tiny_config):
    decoder = Decoder(32, 32, blocks=2, hidden=16)
    feature = torch.rand(1, 32, 64, 64)
    prior = torch.rand(1, 32, 64, 64)
    out = decoder(feature, prior)
    assert out.shape == (1, 3, 256, 256)
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_decoder_concat_variant_matches_shapes():
    spade = Decoder(32, 32, blocks=2, hidden=16, use_spade=True)
    concat = Decoder(32, 32, blocks=2, hidden=16, use_spade=False)
    feature = torch.rand(1, 32, 16, 16)
    prior = torch.rand(1, 32, 16, 16)
    assert spade(feature, prior).shape == concat(feature, prior).shape


def test_decoder_rejects_misaligned_prior():
    decoder = Decoder(16, 16, blocks=1, hidden=8)
    with pytest.raises(DimensionError):
        decoder(torch.rand(1, 16, 8, 8), torch.rand(1, 16, 4, 4))


def test_discriminator_scores_are_patchwise_probabilities():
    disc = PatchDiscriminator(16)
    scores = disc(torch.rand(2, 3, 256, 256) * 2 - 1)
    assert scores.shape == (2, 1, 16, 16)
    assert scores.min() > 0.0 and scores.max() < 1.0


# ---------------------------------------------------------------------------
# full model
# ---------------------------------------------------------------------------

def test_forward_shape_chain(tiny_config):
    model = InpaintingModel(tiny_config)
    c, d = tiny_config.feature_width, tiny_config.teacher_channels
    for size in (32, 64):
        sample = random_sample(batch=1, size=size)
        out = model(sample)
        assert out.output.shape == (1, 3, size, size)
        assert out.prior.shape == (1, c, size // 4, size // 4)
        assert out.adapted.shape == (1, d, size // 4, size // 4)


def test_forward_rejects_tampered_enlarged_view(tiny_model):
    sample = random_sample(batch=1, size=32)
    bad = MaskedSample(
        sample.image, sample.mask, sample.corrupted,
        sample.image, sample.corrupted, sample.mask,  # not 2x
    )
    with pytest.raises(DimensionError):
        tiny_model(bad)


def test_every_generator_parameter_receives_gradient(tiny_model, tiny_discriminator):
    sample = random_sample(batch=2, size=32, seed=4)
    from priorpaint.data import resize_mask_nearest
    from priorpaint.teacher import build_standin_teacher

    teacher = build_standin_teacher(seed=0, channels=tiny_model.config.teacher_channels)
    out = tiny_model(sample)
    target = teacher(sample.image_up)
    mask_small = resize_mask_nearest(sample.mask, out.adapted.shape[-2:])
    l_img = reconstruction_loss(sample.image, out.output, sample.mask, 5.0)
    l_adv = generator_adv_loss(tiny_discriminator(out.output), "nonsaturating")
    l_prior = prior_loss(target, out.adapted, mask_small, 3.0)
    objective, _ = total_loss(l_img, l_adv, l_prior, torch.zeros(()), LossConfig())
    objective.backward()
    for name, param in tiny_model.named_parameters():
        assert param.grad is not None, name
        assert param.grad.abs().max() > 0, name


def test_composite_endpoints_and_improvement(tiny_model):
    sample = random_sample(batch=1, size=32, seed=9)
    with torch.no_grad():
        output = tiny_model(sample).output

    zero_mask = torch.zeros_like(sample.mask)
    assert torch.equal(composite(output, sample.image, zero_mask), sample.image)
    full_mask = torch.ones_like(sample.mask)
    assert torch.equal(composite(output, sample.image, full_mask), output)

    from priorpaint import metrics

    comp = composite(output, sample.image, sample.mask)
    ref = metrics.to_unit_range(sample.image)
    assert metrics.psnr(ref, metrics.to_unit_range(comp)) >= metrics.psnr(
        ref, metrics.to_unit_range(output)
    )


def test_ablation_flags_change_no_shapes(tiny_config):
    variants = [
        ModelConfig(**{**vars(tiny_config)}),
        ModelConfig(**{**vars(tiny_config), "use_spade": False}),
        ModelConfig(**{**vars(tiny_config), "use_prior": False}),
    ]
    sample = random_sample(batch=1, size=32, seed=2)
    shapes = []
    for config in variants:
        torch.manual_seed(0)
        out = InpaintingModel(config)(sample)
        shapes.append((out.output.shape, out.prior.shape, out.adapted.shape))
    assert shapes[0] == shapes[1] == shapes[2]


def test_model_config_validation():
    with pytest.raises(ConfigurationError):
        ModelConfig(feature_width=30).validate()
    with pytest.raises(ConfigurationError):
        ModelConfig(spade_blocks=0).validate()
    with pytest.raises(ConfigurationError):
        ModelConfig(teacher_channels=0).validate()
