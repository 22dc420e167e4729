import torch
import pytest

from priorpaint.exceptions import (
    CheckpointError,
    ConfigurationError,
    DimensionError,
    UnsupportedBackboneError,
)
from priorpaint.teacher import (
    build_alt_teacher,
    build_standin_teacher,
    load_external_teacher,
    teacher_features,
)


def test_output_shape_matches_declared_contract():
    # A 2H x 2W input maps to d x H/4 x W/4; for a 512-square input and
    # d=512 that is 512 x 64 x 64.
    teacher = build_standin_teacher(seed=0, channels=512)
    out = teacher_features(torch.zeros(1, 3, 512, 512), teacher)
    assert out.shape == (1, 512, 64, 64)


def test_small_shape_contract():
    teacher = build_standin_teacher(seed=0, channels=64)
    out = teacher(torch.zeros(2, 3, 128, 128))
    assert out.shape == (2, 64, 16, 16)


def test_forward_is_deterministic_and_gradient_free():
    teacher = build_standin_teacher(seed=3, channels=16)
    x = torch.rand(1, 3, 64, 64) * 2 - 1
    a = teacher(x)
    b = teacher(x)
    assert torch.equal(a, b)
    assert not a.requires_grad
    assert all(not p.requires_grad for p in teacher.parameters())


def test_builder_is_seed_deterministic():
    a = build_standin_teacher(seed=7, channels=32)
    b = build_standin_teacher(seed=7, channels=32)
    assert a.state_bytes() == b.state_bytes()
    c = build_standin_teacher(seed=8, channels=32)
    assert a.state_bytes() != c.state_bytes()


def test_output_statistics_are_not_degenerate():
    teacher = build_standin_teacher(seed=0, channels=64)
    x = torch.rand(4, 3, 64, 64) * 2 - 1
    std = teacher(x).std().item()
    assert 0.01 < std < 100


def test_teacher_is_sensitive_to_single_pixel_change():
    teacher = build_standin_teacher(seed=0, channels=16)
    x = torch.zeros(1, 3, 64, 64)
    y = x.clone()
    y[0, 0, 10, 10] = 1.0
    assert not torch.equal(teacher(x), teacher(y))


def test_rejects_input_not_divisible_by_8():
    teacher = build_standin_teacher(seed=0, channels=16)
    with pytest.raises(DimensionError):
        teacher(torch.zeros(1, 3, 60, 60))


def test_stride16_backbone_is_resampled_to_stride_8():
    teacher = build_alt_teacher(seed=0, channels=24)
    out = teacher(torch.zeros(1, 3, 512, 512))
    assert out.shape == (1, 24, 64, 64)
    # Raw backbone output is stride 16 before the adapter resamples it.
    raw = teacher.backbone(torch.zeros(1, 3, 512, 512))
    assert raw.shape == (1, 24, 32, 32)


def test_stays_in_eval_mode_under_train_toggle():
    teacher = build_standin_teacher(seed=0, channels=8)
    teacher.train()
    assert not teacher.training


def test_external_load_round_trip(tmp_path):
    original = build_standin_teacher(seed=5, channels=32)
    path = tmp_path / "teacher.pt"
    torch.save(original.backbone.state_dict(), path)
    loaded = load_external_teacher(path, "conv-stride8", channels=32)
    x = torch.rand(1, 3, 64, 64)
    assert torch.equal(original(x), loaded(x))


def test_external_load_error_cases(tmp_path):
    good = tmp_path / "w.pt"
    torch.save(build_standin_teacher(seed=1, channels=16).backbone.state_dict(), good)

    with pytest.raises(UnsupportedBackboneError):
        load_external_teacher(good, "resnet-nonexistent", channels=16)
    with pytest.raises(CheckpointError):
        load_external_teacher(tmp_path / "missing.pt", "conv-stride8", channels=16)
    with pytest.raises(ConfigurationError):
        load_external_teacher(good, "conv-stride8", channels=32)  # channel mismatch

    corrupt_file = tmp_path / "corrupt.pt"
    corrupt_file.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_external_teacher(corrupt_file, "conv-stride8", channels=16)
