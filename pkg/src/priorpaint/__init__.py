"""Image inpainting guided by semantic priors distilled from a frozen teacher.

A corrupted image is encoded twice: a local image encoder produces texture
features while a prior learner, fed a 2x-enlarged view, regresses toward
the features a frozen pretext-task network extracts from the intact image.
The decoder injects the learned prior into the image features through
spatially-adaptive modulation and is trained adversarially alongside a
reconstruction and a distillation loss.
"""

from .data import (
    BUCKETS,
    BUCKET_LABELS,
    MaskedSample,
    RatioBucket,
    bucket_of,
    build_eval_pairing,
    corrupt,
    generate_irregular_mask,
    mask_ratio,
    preprocess,
    upsample_pair,
)
from .evaluate import BucketedReport, evaluate
from .losses import LossConfig, LossReport
from .metrics import mae, psnr, ssim
from .networks import (
    InpaintingModel,
    ModelConfig,
    PatchDiscriminator,
    composite,
    instance_normalize,
)
from .teacher import FrozenTeacher, build_standin_teacher, load_external_teacher
from .trainer import TrainConfig, Trainer, lr_schedule, load_model_for_eval

__version__ = "0.1.0"

__all__ = [
    "BUCKETS",
    "BUCKET_LABELS",
    "BucketedReport",
    "FrozenTeacher",
    "InpaintingModel",
    "LossConfig",
    "LossReport",
    "MaskedSample",
    "ModelConfig",
    "PatchDiscriminator",
    "RatioBucket",
    "TrainConfig",
    "Trainer",
    "bucket_of",
    "build_eval_pairing",
    "build_standin_teacher",
    "composite",
    "corrupt",
    "evaluate",
    "generate_irregular_mask",
    "instance_normalize",
    "load_external_teacher",
    "load_model_for_eval",
    "lr_schedule",
    "mae",
    "mask_ratio",
    "preprocess",
    "psnr",
    "ssim",
    "upsample_pair",
]
