# Visualizing what the prior learner encodes.
#
# Each spatial position of the learned prior is a channel vector; k-means
# over those vectors paints a segmentation-like map of the scene. After a
# short training run the clusters start following image structure rather
# than the mask geometry.

import tempfile
from pathlib import Path

from PIL import Image

from priorpaint.config import build_trainer, build_training_data, load_config
from priorpaint.data import MaskedSample
from priorpaint.visualize import prior_cluster_map, visualize_priors

config = load_config(overrides=["profile=desk", "train.max_steps=150"])
trainer = build_trainer(config)
data = build_training_data(config)
trainer.fit(data)

sample = MaskedSample.create(data.images[0], data.mask_for(0, 0))
rgb = visualize_priors(trainer.model, sample, k=6, seed=0)

out = Path(tempfile.mkdtemp(prefix="priorpaint_viz_")) / "prior_clusters.png"
Image.fromarray(rgb, mode="RGB").save(out)
print(f"cluster map written to {out}")

# The raw label map: one integer per stride-4 position.
labels = prior_cluster_map(
    trainer.model.prior_learner(sample.corrupted_up, sample.mask_up)[0], k=6, seed=0
)
print(f"label map {labels.shape}, clusters used: {sorted(set(labels.flatten().tolist()))}")
for row in labels[::4]:
    print("  " + "".join(str(v) for v in row[::2]))
