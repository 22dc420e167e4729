import dataclasses

import pytest
import torch

from priorpaint.data import synthetic_images, generate_irregular_mask, BUCKETS
from priorpaint.exceptions import CheckpointError, ConfigurationError, DivergenceError
from priorpaint.losses import LossConfig
from priorpaint.networks import InpaintingModel, ModelConfig, PatchDiscriminator
from priorpaint.teacher import build_standin_teacher
from priorpaint.trainer import (
    TrainConfig,
    Trainer,
    TrainingData,
    batch_schedule,
    lr_schedule,
)

TINY_MODEL = dict(
    feature_width=32, teacher_channels=16, spade_blocks=2,
    spade_hidden=16, prior_res_blocks=2, disc_base_width=8,
)


def make_trainer(seed=0, use_prior=True, use_spade=True, **loss_kwargs) -> Trainer:
    torch.manual_seed(seed)
    model = InpaintingModel(
        ModelConfig(**{**TINY_MODEL, "use_prior": use_prior, "use_spade": use_spade})
    )
    disc = PatchDiscriminator(8)
    teacher = build_standin_teacher(seed=0, channels=16)
    loss_config = LossConfig(use_prior=use_prior, **loss_kwargs)
    train_config = TrainConfig(seed=seed, batch_size=2)
    return Trainer(model, disc, teacher, loss_config, train_config)


def make_data(count=4, size=32, seed=0) -> TrainingData:
    images = synthetic_images(count, size, seed)
    masks = [
        generate_irregular_mask(seed + i, BUCKETS[2], size, size) for i in range(count)
    ]
    return TrainingData.with_fixed_masks(images, masks)


# ---------------------------------------------------------------------------
# learning-rate schedule
# ---------------------------------------------------------------------------

def test_lr_schedule_step_decay_per_profile():
    places2 = TrainConfig(decay_epoch=30, finetune_epochs=10)
    assert lr_schedule(29, places2) == pytest.approx(1e-4)
    assert lr_schedule(30, places2) == pytest.approx(1e-5)
    streetview = TrainConfig(decay_epoch=50, finetune_epochs=20)
    assert lr_schedule(49, streetview) == pytest.approx(1e-4)
    assert lr_schedule(50, streetview) == pytest.approx(1e-5)
    for config in (places2, streetview):
        assert lr_schedule(0, config) == pytest.approx(1e-4)
    with pytest.raises(ConfigurationError):
        lr_schedule(-1, places2)


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(lr=1e-5, lr_finetune=1e-4).validate()
    with pytest.raises(ConfigurationError):
        TrainConfig(decay_epoch=0).validate()
    with pytest.raises(ConfigurationError):
        TrainConfig(batch_size=0).validate()


def test_batch_schedule_is_seeded_permutation():
    a = batch_schedule(10, 3, seed=1, epoch=0)
    b = batch_schedule(10, 3, seed=1, epoch=0)
    assert a == b
    assert sorted(i for batch in a for i in batch) == list(range(10))
    assert batch_schedule(10, 3, seed=1, epoch=1) != a


# ---------------------------------------------------------------------------
# single-step behavior
# ---------------------------------------------------------------------------

def test_null_objective_leaves_generator_unchanged():
    trainer = make_trainer(image_weight=0.0, adv_weight=0.0, prior_weight=0.0)
    data = make_data()
    g_before = [p.detach().clone() for p in trainer.model.parameters()]
    d_before = [p.detach().clone() for p in trainer.discriminator.parameters()]
    trainer.fit(data, max_steps=1)
    for before, after in zip(g_before, trainer.model.parameters()):
        assert torch.equal(before, after)
    changed = any(
        not torch.equal(before, after)
        for before, after in zip(d_before, trainer.discriminator.parameters())
    )
    assert changed  # the discriminator update is independent of the generator weights


def test_optimizer_parameter_sets_are_disjoint_and_complete():
    trainer = make_trainer()
    g_params = {id(p) for group in trainer.g_optimizer.param_groups for p in group["params"]}
    d_params = {id(p) for group in trainer.d_optimizer.param_groups for p in group["params"]}
    assert not g_params & d_params
    assert g_params == {id(p) for p in trainer.model.parameters()}
    assert d_params == {id(p) for p in trainer.discriminator.parameters()}
    teacher_params = {id(p) for p in trainer.teacher.parameters()}
    assert not teacher_params & (g_params | d_params)


def test_identical_runs_produce_identical_loss_streams():
    reports_a = make_trainer(seed=3).fit(make_data(seed=3), max_steps=5)
    reports_b = make_trainer(seed=3).fit(make_data(seed=3), max_steps=5)
    assert [dataclasses.astuple(r) for r in reports_a] == [
        dataclasses.astuple(r) for r in reports_b
    ]


def test_teacher_weights_are_untouched_by_training():
    trainer = make_trainer()
    before = trainer.teacher.state_bytes()
    trainer.fit(make_data(), max_steps=30)
    assert trainer.teacher.state_bytes() == before


def test_wo_prior_ablation_zeroes_prior_term_and_adapter_gradients():
    trainer = make_trainer(use_prior=False)
    reports = trainer.fit(make_data(), max_steps=4)
    assert all(r.l_prior == 0.0 for r in reports)
    for param in trainer.model.prior_adapter.parameters():
        assert param.grad is None or torch.all(param.grad == 0)


def test_divergence_aborts_with_diagnostics():
    trainer = make_trainer()
    with torch.no_grad():
        next(trainer.model.decoder.parameters()).fill_(float("nan"))
    with pytest.raises(DivergenceError) as err:
        trainer.fit(make_data(), max_steps=1)
    assert "inputs_digest" in err.value.diagnostics
    assert "step" in err.value.diagnostics


def test_mismatched_use_prior_flags_are_rejected():
    torch.manual_seed(0)
    model = InpaintingModel(ModelConfig(**{**TINY_MODEL, "use_prior": False}))
    with pytest.raises(ConfigurationError):
        Trainer(
            model, PatchDiscriminator(8), build_standin_teacher(0, 16),
            LossConfig(use_prior=True), TrainConfig(),
        )


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

def test_checkpoint_round_trip_continues_exactly(tmp_path):
    data = make_data(seed=5)
    trainer = make_trainer(seed=5)
    trainer.fit(data, max_steps=3)
    path = tmp_path / "ckpt.pt"
    trainer.save(path)

    continued = trainer.fit(data, max_steps=5)
    resumed_trainer = Trainer.load(path)
    resumed = resumed_trainer.fit(make_data(seed=5), max_steps=5)

    assert [dataclasses.astuple(r) for r in continued] == [
        dataclasses.astuple(r) for r in resumed
    ]


def test_checkpoint_manifest_lists_every_parameter_once(tmp_path):
    trainer = make_trainer()
    path = tmp_path / "ckpt.pt"
    trainer.save(path)
    payload = torch.load(path, map_location="cpu", weights_only=False)
    manifest = payload["manifest"]
    expected = {f"model.{k}" for k in trainer.model.state_dict()} | {
        f"discriminator.{k}" for k in trainer.discriminator.state_dict()
    }
    assert set(manifest) == expected
    assert len(manifest) == len(expected)


def test_checkpoint_schema_version_is_enforced(tmp_path):
    trainer = make_trainer()
    path = tmp_path / "ckpt.pt"
    trainer.save(path)
    payload = torch.load(path, map_location="cpu", weights_only=False)
    payload["schema_version"] = 999
    torch.save(payload, path)
    with pytest.raises(CheckpointError, match="999"):
        Trainer.load(path)


def test_checkpoint_config_mismatch_is_rejected(tmp_path):
    trainer = make_trainer()
    path = tmp_path / "ckpt.pt"
    trainer.save(path)
    other = ModelConfig(**{**TINY_MODEL, "feature_width": 64})
    with pytest.raises(ConfigurationError):
        Trainer.load(path, expect_model_config=other)


def test_checkpoint_missing_or_corrupt_file(tmp_path):
    with pytest.raises(CheckpointError):
        Trainer.load(tmp_path / "nothing.pt")
    bad = tmp_path / "bad.pt"
    bad.write_bytes(b"garbage")
    with pytest.raises(CheckpointError):
        Trainer.load(bad)


# ---------------------------------------------------------------------------
# smoke: the objective goes down on a fixed batch
# ---------------------------------------------------------------------------

def test_overfit_smoke_total_loss_decreases():
    torch.manual_seed(0)
    data = make_data(count=8, size=64, seed=1)
    trainer = make_trainer(seed=1)
    trainer.config.batch_size = 8  # single fixed batch per epoch
    reports = trainer.fit(data, max_steps=200)
    assert reports[-1].total < reports[0].total
