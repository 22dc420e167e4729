"""Image/mask preprocessing, irregular-mask synthesis, and the evaluation pairing.

Conventions: images are float tensors in [-1, 1] with layout (3, H, W) per
sample or (B, 3, H, W) per batch; masks are {0, 1} tensors with a single
channel where 1 marks invalid (missing) pixels. H and W must be divisible
by 4 because both encoders downsample by a factor of 4.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .exceptions import ConfigurationError, DimensionError, MaskGenerationError, ProtocolError

DEFAULT_FILL = 0.0  # hole fill value in [-1, 1] space (mid-gray)


# ---------------------------------------------------------------------------
# Mask-ratio buckets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioBucket:
    """Half-open coverage interval [lower, upper) for grouping masks."""

    label: str
    lower: float
    upper: float

    def contains(self, ratio: float) -> bool:
        return self.lower <= ratio < self.upper


BUCKETS = tuple(
    RatioBucket(f"{10 * i}%-{10 * (i + 1)}%", i / 10, (i + 1) / 10) for i in range(6)
)

BUCKET_LABELS = tuple(b.label for b in BUCKETS)


def bucket_of(ratio: float) -> RatioBucket:
    """Return the unique bucket containing ``ratio``.

    Boundary ratios belong to the upper interval. Ratios outside [0, 0.6)
    are outside the evaluation protocol and raise ProtocolError.
    """
    if ratio < 0.0 or ratio >= 0.6:
        raise ProtocolError(
            f"mask ratio {ratio:.4f} outside the protocol range [0, 0.6)"
        )
    return BUCKETS[int(ratio * 10)]


def mask_ratio(mask: torch.Tensor) -> float:
    """Fraction of invalid pixels: count of ones over total elements."""
    return float(mask.detach().double().mean().item())


# ---------------------------------------------------------------------------
# Preprocessing and corruption
# ---------------------------------------------------------------------------

def preprocess(raw_image, target_size: int, center_crop: bool = False) -> torch.Tensor:
    """Decode an RGB pixel array into a (3, size, size) tensor in [-1, 1].

    ``raw_image`` may be a PIL image or an (H, W, 3) uint8 array. When
    ``center_crop`` is set the largest centered square is taken before
    resizing. ``target_size`` must be divisible by 4.
    """
    if target_size % 4 != 0:
        raise ConfigurationError(f"target_size {target_size} is not divisible by 4")
    if isinstance(raw_image, np.ndarray):
        if raw_image.ndim != 3 or raw_image.shape[2] != 3:
            raise ProtocolError(f"expected an (H, W, 3) RGB array, got {raw_image.shape}")
        pil = Image.fromarray(raw_image.astype(np.uint8), mode="RGB")
    else:
        pil = raw_image
        if pil.mode != "RGB":
            raise ProtocolError(f"expected an RGB image, got mode {pil.mode!r}")
    if pil.width < 1 or pil.height < 1:
        raise ProtocolError("image has no pixels")

    if center_crop:
        side = min(pil.width, pil.height)
        left = (pil.width - side) // 2
        top = (pil.height - side) // 2
        pil = pil.crop((left, top, left + side, top + side))
    if (pil.width, pil.height) != (target_size, target_size):
        pil = pil.resize((target_size, target_size), Image.BILINEAR)

    arr = np.asarray(pil, dtype=np.float32)
    tensor = torch.from_numpy(arr).permute(2, 0, 1)
    return tensor / 127.5 - 1.0


def _check_spatial(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(
            f"{what}: spatial sizes differ, {tuple(a.shape[-2:])} vs {tuple(b.shape[-2:])}"
        )


def corrupt(image: torch.Tensor, mask: torch.Tensor, fill: float = DEFAULT_FILL) -> torch.Tensor:
    """Zero out invalid pixels and substitute ``fill``: image*(1-mask) + fill*mask."""
    _check_spatial(image, mask, "corrupt")
    return image * (1.0 - mask) + fill * mask


def upsample_pair(
    image: torch.Tensor,
    corrupted: torch.Tensor,
    mask: torch.Tensor,
    fill: float = DEFAULT_FILL,
):
    """Produce the 2x enlarged (image, corrupted, mask) triple.

    Images are upsampled bilinearly; the mask uses nearest-neighbor so it
    stays binary. The enlarged corrupted image is recomputed from the
    enlarged image and mask so hole boundaries stay exact.
    """
    _check_spatial(image, mask, "upsample_pair")
    _check_spatial(image, corrupted, "upsample_pair")
    squeeze = image.dim() == 3
    img = image.unsqueeze(0) if squeeze else image
    msk = mask.unsqueeze(0) if mask.dim() == 3 else mask
    image_up = F.interpolate(img, scale_factor=2, mode="bilinear", align_corners=False)
    mask_up = F.interpolate(msk, scale_factor=2, mode="nearest")
    corrupted_up = corrupt(image_up, mask_up, fill)
    if squeeze:
        image_up = image_up.squeeze(0)
        corrupted_up = corrupted_up.squeeze(0)
    if mask.dim() == 3:
        mask_up = mask_up.squeeze(0)
    return image_up, corrupted_up, mask_up


def resize_mask_nearest(mask: torch.Tensor, size) -> torch.Tensor:
    """Nearest-neighbor resize; the only mask resize that preserves binarity."""
    squeeze = mask.dim() == 3
    m = mask.unsqueeze(0) if squeeze else mask
    out = F.interpolate(m, size=tuple(size), mode="nearest")
    return out.squeeze(0) if squeeze else out


@dataclass
class MaskedSample:
    """A batch of images with masks, corruptions, and their 2x variants.

    mask conventions as module-level; *_up fields are exactly twice the
    spatial size of their source.
    """

    image: torch.Tensor
    mask: torch.Tensor
    corrupted: torch.Tensor
    image_up: torch.Tensor
    corrupted_up: torch.Tensor
    mask_up: torch.Tensor

    @classmethod
    def create(cls, image: torch.Tensor, mask: torch.Tensor, fill: float = DEFAULT_FILL):
        if image.dim() == 3:
            image = image.unsqueeze(0)
        if mask.dim() == 3:
            mask = mask.unsqueeze(0)
        if image.shape[-1] % 4 or image.shape[-2] % 4:
            raise DimensionError(
                f"image spatial size {tuple(image.shape[-2:])} is not divisible by 4"
            )
        _check_spatial(image, mask, "MaskedSample")
        corrupted = corrupt(image, mask, fill)
        image_up, corrupted_up, mask_up = upsample_pair(image, corrupted, mask, fill)
        return cls(image, mask, corrupted, image_up, corrupted_up, mask_up)

    def to(self, device):
        return MaskedSample(*(t.to(device) for t in (
            self.image, self.mask, self.corrupted,
            self.image_up, self.corrupted_up, self.mask_up)))

    @property
    def batch_size(self) -> int:
        return self.image.shape[0]


# ---------------------------------------------------------------------------
# Irregular mask synthesis
# ---------------------------------------------------------------------------

def _stamp_disk(canvas: np.ndarray, cy: float, cx: float, radius: float) -> None:
    h, w = canvas.shape
    r = int(np.ceil(radius))
    y0, y1 = max(0, int(cy) - r), min(h, int(cy) + r + 1)
    x0, x1 = max(0, int(cx) - r), min(w, int(cx) + r + 1)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.ogrid[y0:y1, x0:x1]
    canvas[y0:y1, x0:x1] |= ((yy - cy) ** 2 + (xx - cx) ** 2) <= radius**2


def _draw_stroke(canvas: np.ndarray, rng: np.random.Generator) -> None:
    h, w = canvas.shape
    size = min(h, w)
    y = rng.uniform(0, h)
    x = rng.uniform(0, w)
    angle = rng.uniform(0, 2 * np.pi)
    n_segments = rng.integers(2, 7)
    radius = rng.uniform(size / 48, size / 20)
    for _ in range(n_segments):
        angle += rng.uniform(-0.9, 0.9)
        length = rng.uniform(size / 16, size / 6)
        ny = np.clip(y + length * np.sin(angle), 0, h - 1)
        nx = np.clip(x + length * np.cos(angle), 0, w - 1)
        steps = max(2, int(np.hypot(ny - y, nx - x) / max(radius / 2, 1)) + 1)
        for t in np.linspace(0.0, 1.0, steps):
            _stamp_disk(canvas, y + (ny - y) * t, x + (nx - x) * t, radius)
        y, x = ny, nx


def generate_irregular_mask(
    rng_seed: int,
    target_bucket: RatioBucket,
    height: int,
    width: int,
    max_attempts: int = 100,
) -> torch.Tensor:
    """Synthesize a free-form stroke mask whose coverage lands in the bucket.

    Deterministic given the seed. Returns a (1, H, W) binary tensor. Raises
    MaskGenerationError (reporting the last achieved ratio) if the bucket is
    not hit within ``max_attempts``.
    """
    if height % 4 or width % 4:
        raise ConfigurationError(f"mask size {height}x{width} is not divisible by 4")
    achieved = 0.0
    total = height * width
    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence([rng_seed, attempt]))
        canvas = np.zeros((height, width), dtype=bool)
        # Grow stroke by stroke toward a point inside the interval; each
        # stroke adds far less than the 10% bucket width, so the first
        # coverage >= target almost always still lies below the upper edge.
        target = rng.uniform(max(target_bucket.lower, 0.01), target_bucket.upper)
        while canvas.mean() < target:
            _draw_stroke(canvas, rng)
        achieved = canvas.mean()
        if target_bucket.contains(achieved):
            return torch.from_numpy(canvas.astype(np.float32)).unsqueeze(0)
    raise MaskGenerationError(
        f"could not reach bucket {target_bucket.label} after {max_attempts} attempts "
        f"(last achieved ratio {achieved:.4f})",
        achieved_ratio=achieved,
    )


# ---------------------------------------------------------------------------
# Mask and image I/O
# ---------------------------------------------------------------------------

def load_mask_png(path) -> torch.Tensor:
    """Load a single-channel PNG; pixel values >= 128 map to 1 (invalid)."""
    pil = Image.open(path).convert("L")
    arr = np.asarray(pil, dtype=np.uint8)
    return torch.from_numpy((arr >= 128).astype(np.float32)).unsqueeze(0)


def save_mask_png(mask: torch.Tensor, path) -> None:
    arr = (mask.detach().squeeze().cpu().numpy() >= 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)


def load_image(path, target_size: int, center_crop: bool = False) -> torch.Tensor:
    with Image.open(path) as pil:
        return preprocess(pil.convert("RGB"), target_size, center_crop)


def save_image(image: torch.Tensor, path) -> None:
    """Write a [-1, 1] image tensor (3, H, W) as an 8-bit PNG."""
    arr = image.detach().squeeze(0) if image.dim() == 4 else image.detach()
    arr = ((arr.clamp(-1, 1) + 1.0) * 127.5).round().byte().cpu().numpy()
    Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path)


IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


def list_image_ids(directory):
    ids = sorted(
        f for f in os.listdir(str(directory)) if f.lower().endswith(IMAGE_EXTENSIONS)
    )
    if not ids:
        raise ConfigurationError(f"no images found under {directory}")
    return ids


class ImageFolder:
    """Images of a directory, preprocessed lazily, keyed by filename."""

    def __init__(self, directory, image_size: int, center_crop: bool = False):
        self.directory = str(directory)
        self.image_size = image_size
        self.center_crop = center_crop
        self.ids = list_image_ids(self.directory)

    def __len__(self):
        return len(self.ids)

    def image(self, image_id: str) -> torch.Tensor:
        return load_image(
            os.path.join(self.directory, image_id), self.image_size, self.center_crop
        )


class MaskFolder:
    """Binary PNG masks of a directory, keyed by filename."""

    def __init__(self, directory):
        self.directory = str(directory)
        self.ids = sorted(
            f for f in os.listdir(self.directory) if f.lower().endswith(".png")
        )
        if not self.ids:
            raise ConfigurationError(f"no masks found under {self.directory}")

    def __len__(self):
        return len(self.ids)

    def mask(self, mask_id: str) -> torch.Tensor:
        return load_mask_png(os.path.join(self.directory, mask_id))


class ArrayImageSet:
    """In-memory stand-in for ImageFolder (tests, demos, synthetic data)."""

    def __init__(self, images: torch.Tensor, ids=None):
        self.images = images
        self.ids = list(ids) if ids is not None else [f"img_{i:04d}" for i in range(len(images))]

    def __len__(self):
        return len(self.ids)

    def image(self, image_id: str) -> torch.Tensor:
        return self.images[self.ids.index(image_id)]


class ArrayMaskSet:
    def __init__(self, masks, ids=None):
        self.masks = list(masks)
        self.ids = list(ids) if ids is not None else [f"mask_{i:04d}" for i in range(len(self.masks))]

    def __len__(self):
        return len(self.ids)

    def mask(self, mask_id: str) -> torch.Tensor:
        return self.masks[self.ids.index(mask_id)]


# ---------------------------------------------------------------------------
# Evaluation pairing manifest
# ---------------------------------------------------------------------------

def build_eval_pairing(image_ids, mask_ids, rng_seed: int):
    """Assign one mask per image, deterministically under the seed.

    Masks are sampled without replacement while the pool lasts, then with
    replacement. The pairing is held fixed across runs and ablations so
    comparisons see identical corruptions.
    """
    image_ids = list(image_ids)
    mask_ids = list(mask_ids)
    if not image_ids or not mask_ids:
        raise ConfigurationError("pairing needs non-empty image and mask pools")
    rng = np.random.default_rng(rng_seed)
    if len(mask_ids) >= len(image_ids):
        chosen = rng.choice(len(mask_ids), size=len(image_ids), replace=False)
    else:
        chosen = rng.choice(len(mask_ids), size=len(image_ids), replace=True)
    return [(img, mask_ids[int(j)]) for img, j in zip(image_ids, chosen)]


def write_pairing(pairing, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for image_id, mask_id in pairing:
            fh.write(f"{image_id}\t{mask_id}\n")


def read_pairing(path):
    pairing = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ProtocolError(f"{path}:{line_no}: expected 'image_id<TAB>mask_id'")
            pairing.append((parts[0], parts[1]))
    return pairing


# ---------------------------------------------------------------------------
# Synthetic data (demos and desk-scale runs)
# ---------------------------------------------------------------------------

def synthetic_images(count: int, size: int, seed: int) -> torch.Tensor:
    """Smooth random color fields in [-1, 1], shape (count, 3, size, size).

    Low-frequency noise plus a gradient; enough structure for the model to
    learn from without any external dataset.
    """
    rng = np.random.default_rng(seed)
    coarse = rng.normal(size=(count, 3, 8, 8)).astype(np.float32)
    fields = F.interpolate(
        torch.from_numpy(coarse), size=(size, size), mode="bilinear", align_corners=False
    )
    ramp = torch.linspace(-1.0, 1.0, size)
    gradient = ramp.view(1, 1, size, 1) * torch.from_numpy(
        rng.uniform(-1, 1, size=(count, 3, 1, 1)).astype(np.float32)
    )
    return torch.tanh(fields + gradient)
