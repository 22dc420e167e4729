"""Cluster maps of learned priors, plus small image-grid helpers.

Each spatial position of the prior is treated as a channel vector; seeded
k-means groups the vectors and a fixed palette colors the clusters. The
label map is upsampled with nearest-neighbor to the input resolution.
"""

from __future__ import annotations

import warnings

import numpy as np
import torch

from .data import MaskedSample
from .exceptions import ConfigurationError

KMEANS_MAX_ITER = 100

# 16 fixed, well-separated colors; cluster identities are arbitrary.
PALETTE = np.array(
    [
        (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
        (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
        (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
        (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    ],
    dtype=np.uint8,
)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ style seeding: spread initial centroids by squared distance."""
    centroids = np.empty((k, points.shape[1]), dtype=points.dtype)
    centroids[0] = points[rng.integers(len(points))]
    sq_dist = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = sq_dist.sum()
        if total <= 0:
            centroids[i:] = centroids[0]
            break
        probs = sq_dist / total
        centroids[i] = points[rng.choice(len(points), p=probs)]
        sq_dist = np.minimum(sq_dist, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int, max_iter: int = KMEANS_MAX_ITER):
    """Seeded Lloyd iterations; returns (labels, centroids).

    Falls back to the number of distinct points when that is smaller than
    k. The returned labels are each point's nearest centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if k < 2:
        raise ConfigurationError("cluster count must be >= 2")
    distinct = np.unique(points, axis=0)
    if len(distinct) < k:
        warnings.warn(
            f"only {len(distinct)} distinct points; reducing cluster count from {k}"
        )
        k = len(distinct)
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    labels = None
    for _ in range(max_iter):
        dists = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = dists.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = points[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    # Final assignment against the final centroids.
    dists = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return dists.argmin(axis=1), centroids


def prior_cluster_map(prior: torch.Tensor, k: int, seed: int) -> np.ndarray:
    """Cluster the channel vectors of a (c, h, w) prior into a (h, w) label map."""
    if prior.dim() == 4:
        prior = prior.squeeze(0)
    c, h, w = prior.shape
    points = prior.detach().cpu().numpy().reshape(c, h * w).T
    labels, _ = kmeans(points, k, seed)
    return labels.reshape(h, w)


def render_cluster_map(labels: np.ndarray, target_size) -> np.ndarray:
    """Color a label map with the fixed palette and upscale to (H, W, 3)."""
    colored = PALETTE[labels % len(PALETTE)]
    th, tw = target_size
    rows = (np.arange(th) * labels.shape[0]) // th
    cols = (np.arange(tw) * labels.shape[1]) // tw
    return colored[rows][:, cols]


def visualize_priors(model, sample: MaskedSample, k: int, seed: int) -> np.ndarray:
    """RGB cluster visualization of the prior learned for ``sample``."""
    model.eval()
    with torch.no_grad():
        prior = model.prior_learner(sample.corrupted_up, sample.mask_up)
    labels = prior_cluster_map(prior[0], k, seed)
    return render_cluster_map(labels, sample.image.shape[-2:])


def side_by_side(images) -> torch.Tensor:
    """Concatenate same-height (3, H, W) images along width with a gap."""
    gap = torch.ones(3, images[0].shape[-2], 4)
    pieces = []
    for i, img in enumerate(images):
        if i:
            pieces.append(gap)
        pieces.append(img.detach().cpu().clamp(-1, 1))
    return torch.cat(pieces, dim=-1)
