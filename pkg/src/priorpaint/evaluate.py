"""Bucketed evaluation over a fixed image-mask pairing.

Each pair is inferred once; metrics are computed on [0, 1]-rescaled images
(composited into the hole by default) and aggregated per mask-ratio bucket,
for the two coarse ranges 20%-40% and 40%-60%, and over all samples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import torch

from . import metrics
from .data import BUCKET_LABELS, MaskedSample, bucket_of, mask_ratio
from .exceptions import ProtocolError
from .networks import composite as composite_fn

AGGREGATE_ROWS = {
    "20%-40%": ("20%-30%", "30%-40%"),
    "40%-60%": ("40%-50%", "50%-60%"),
}

REPORT_COLUMNS = BUCKET_LABELS + ("20%-40%", "40%-60%", "All")


@dataclass(frozen=True)
class MetricTriple:
    psnr: float
    ssim: float
    mae: float


@dataclass
class SampleResult:
    image_id: str
    mask_id: str
    ratio: float
    bucket: str
    metrics: MetricTriple


@dataclass
class BucketedReport:
    """Mean metrics per column plus per-sample records for auditing."""

    samples: list = field(default_factory=list)

    def _select(self, column: str):
        if column == "All":
            return self.samples
        if column in AGGREGATE_ROWS:
            members = AGGREGATE_ROWS[column]
            return [s for s in self.samples if s.bucket in members]
        return [s for s in self.samples if s.bucket == column]

    def count(self, column: str) -> int:
        return len(self._select(column))

    def mean(self, column: str, name: str):
        selected = self._select(column)
        if not selected:
            return None
        return sum(getattr(s.metrics, name) for s in selected) / len(selected)

    def to_csv(self) -> str:
        lines = ["metric," + ",".join(REPORT_COLUMNS)]
        for name in ("psnr", "ssim", "mae"):
            cells = []
            for column in REPORT_COLUMNS:
                value = self.mean(column, name)
                cells.append("" if value is None else f"{value:.6f}")
            lines.append(f"{name}," + ",".join(cells))
        lines.append("count," + ",".join(str(self.count(c)) for c in REPORT_COLUMNS))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "columns": {
                column: {
                    "count": self.count(column),
                    "psnr": self.mean(column, "psnr"),
                    "ssim": self.mean(column, "ssim"),
                    "mae": self.mean(column, "mae"),
                }
                for column in REPORT_COLUMNS
            },
            "samples": [
                {
                    "image_id": s.image_id,
                    "mask_id": s.mask_id,
                    "ratio": s.ratio,
                    "bucket": s.bucket,
                    "psnr": s.metrics.psnr,
                    "ssim": s.metrics.ssim,
                    "mae": s.metrics.mae,
                }
                for s in self.samples
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def evaluate(
    model,
    image_set,
    mask_set,
    pairing,
    composite: bool = True,
    fill: float = 0.0,
    device: str = "cpu",
) -> BucketedReport:
    """Run inference over the pairing and aggregate metrics per bucket.

    ``model`` is any callable mapping a MaskedSample to an object whose
    first element is the generated image batch; the identity of the pairing
    (not the model) determines which corruption each image receives.
    """
    missing_images = sorted({i for i, _ in pairing} - set(image_set.ids))
    missing_masks = sorted({m for _, m in pairing} - set(mask_set.ids))
    if missing_images or missing_masks:
        raise ProtocolError(
            f"pairing references missing ids: images={missing_images} masks={missing_masks}"
        )

    was_training = getattr(model, "training", False)
    if hasattr(model, "eval"):
        model.eval()
    report = BucketedReport()
    try:
        with torch.no_grad():
            for image_id, mask_id in pairing:
                image = image_set.image(image_id).to(device)
                mask = mask_set.mask(mask_id).to(device)
                sample = MaskedSample.create(image, mask, fill)
                output = model(sample)[0]
                if composite:
                    output = composite_fn(output, sample.image, sample.mask)
                ratio = mask_ratio(sample.mask)
                bucket = bucket_of(ratio)
                ref = metrics.to_unit_range(sample.image)
                cand = metrics.to_unit_range(output)
                triple = MetricTriple(
                    psnr=metrics.psnr(ref, cand),
                    ssim=metrics.ssim(ref, cand),
                    mae=metrics.mae(ref, cand),
                )
                report.samples.append(
                    SampleResult(image_id, mask_id, ratio, bucket.label, triple)
                )
    finally:
        if was_training and hasattr(model, "train"):
            model.train()
    return report
