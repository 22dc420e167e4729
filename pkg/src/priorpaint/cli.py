"""Command-line entry points.

Commands: train, eval, infer, visualize-priors, make-masks, make-pairing,
and ablate. Every command resolves (config file + overrides + inputs) to
files in the output directory; the resolved configuration is written next
to the outputs. Exit codes: 0 success, 2 configuration error, 3
data/protocol error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import os
import sys

import torch

from . import config as config_mod
from .data import (
    BUCKET_LABELS,
    BUCKETS,
    ArrayMaskSet,
    ImageFolder,
    MaskFolder,
    MaskedSample,
    build_eval_pairing,
    generate_irregular_mask,
    list_image_ids,
    load_image,
    load_mask_png,
    read_pairing,
    save_image,
    save_mask_png,
    write_pairing,
)
from .evaluate import evaluate
from .exceptions import ConfigurationError, DivergenceError, PriorpaintError, ProtocolError
from .networks import composite
from .trainer import load_model_for_eval
from .visualize import render_cluster_map, prior_cluster_map, side_by_side

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3
EXIT_DIVERGENCE = 4


def _ensure_out(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _resolve_config(args) -> config_mod.ExperimentConfig:
    return config_mod.load_config(
        getattr(args, "config", None),
        overrides=getattr(args, "set", None) or (),
        seed=getattr(args, "seed", None),
    )


def _train_run(config, out_dir) -> str:
    """Train under a resolved config; returns the checkpoint path."""
    _ensure_out(out_dir)
    config_mod.dump_config(config, os.path.join(out_dir, "config.yaml"))
    trainer = config_mod.build_trainer(config)
    data = config_mod.build_training_data(config)
    log_path = os.path.join(out_dir, "log.csv")
    with open(log_path, "w", encoding="utf-8", newline="\n") as log_fh:
        trainer.fit(data, log_fh=log_fh)
    checkpoint = os.path.join(out_dir, "checkpoint.pt")
    trainer.save(checkpoint)
    return checkpoint


def cmd_train(args) -> int:
    config = _resolve_config(args)
    checkpoint = _train_run(config, args.out)
    print(f"checkpoint written to {checkpoint}")
    return EXIT_OK


def _eval_sources(args):
    images = ImageFolder(args.images, args.image_size, args.center_crop)
    masks = MaskFolder(args.masks)
    pairing = read_pairing(args.manifest)
    return images, masks, pairing


def cmd_eval(args) -> int:
    model, _, _, train_config = load_model_for_eval(args.checkpoint)
    images, masks, pairing = _eval_sources(args)
    report = evaluate(
        model, images, masks, pairing,
        composite=not args.no_composite, fill=train_config.fill,
    )
    out = _ensure_out(args.out)
    csv_path = os.path.join(out, "report.csv")
    json_path = os.path.join(out, "report.json")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_csv())
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())
    print(report.to_csv(), end="")
    print(f"reports written to {csv_path} and {json_path}")
    return EXIT_OK


def cmd_infer(args) -> int:
    model, _, _, train_config = load_model_for_eval(args.checkpoint)
    image = load_image(args.image, args.image_size) if args.image_size else _load_native(args.image)
    mask = load_mask_png(args.mask)
    sample = MaskedSample.create(image, mask, train_config.fill)
    with torch.no_grad():
        output = model(sample).output
    composited = composite(output, sample.image, sample.mask)
    out = _ensure_out(args.out)
    save_image(sample.corrupted[0], os.path.join(out, "corrupted.png"))
    save_image(output[0], os.path.join(out, "output.png"))
    save_image(composited[0], os.path.join(out, "composited.png"))
    grid = side_by_side([sample.corrupted[0], output[0], composited[0]])
    save_image(grid, os.path.join(out, "grid.png"))
    print(f"wrote corrupted/output/composited/grid PNGs to {out}")
    return EXIT_OK


def _load_native(path):
    """Load at native size; both sides must be divisible by 4."""
    import numpy as np
    from PIL import Image

    with Image.open(path) as pil:
        pil = pil.convert("RGB")
        if pil.width % 4 or pil.height % 4:
            raise ConfigurationError(
                f"image size {pil.width}x{pil.height} must be divisible by 4; "
                "crop the input or pass --image-size"
            )
        arr = np.asarray(pil, dtype=np.float32)
    return torch.from_numpy(arr).permute(2, 0, 1) / 127.5 - 1.0


def cmd_visualize_priors(args) -> int:
    from PIL import Image

    model, _, _, train_config = load_model_for_eval(args.checkpoint)
    image = load_image(args.image, args.image_size) if args.image_size else _load_native(args.image)
    mask = load_mask_png(args.mask)
    sample = MaskedSample.create(image, mask, train_config.fill)
    with torch.no_grad():
        prior = model.prior_learner(sample.corrupted_up, sample.mask_up)
    labels = prior_cluster_map(prior[0], args.clusters, args.seed or 0)
    rgb = render_cluster_map(labels, sample.image.shape[-2:])
    out = _ensure_out(args.out)
    path = os.path.join(out, "prior_clusters.png")
    Image.fromarray(rgb, mode="RGB").save(path)
    print(f"cluster map written to {path}")
    return EXIT_OK


def cmd_make_masks(args) -> int:
    out = _ensure_out(args.out)
    labels = args.buckets.split(",") if args.buckets else list(BUCKET_LABELS)
    unknown = set(labels) - set(BUCKET_LABELS)
    if unknown:
        raise ConfigurationError(f"unknown buckets: {sorted(unknown)}")
    buckets = [b for b in BUCKETS if b.label in labels]
    seed = args.seed or 0
    count = 0
    for bucket in buckets:
        for i in range(args.count):
            mask = generate_irregular_mask(seed + count, bucket, args.size, args.size)
            name = f"mask_{bucket.label.replace('%', '').replace('-', '_')}_{i:04d}.png"
            save_mask_png(mask, os.path.join(out, name))
            count += 1
    print(f"wrote {count} masks to {out}")
    return EXIT_OK


def cmd_make_pairing(args) -> int:
    image_ids = list_image_ids(args.images)
    masks = MaskFolder(args.masks)
    pairing = build_eval_pairing(image_ids, masks.ids, args.seed or 0)
    write_pairing(pairing, args.out)
    print(f"pairing manifest with {len(pairing)} rows written to {args.out}")
    return EXIT_OK


ABLATIONS = {
    "no-prior": {"loss": {"use_prior": False}, "model": {"use_prior": False}},
    "concat": {"model": {"use_spade": False}},
    "alt-teacher": {"teacher": {"name": "standin-alt"}},
}


def cmd_ablate(args) -> int:
    if args.name not in ABLATIONS:
        raise ConfigurationError(
            f"unknown ablation {args.name!r}; choose from {sorted(ABLATIONS)}"
        )
    base = _resolve_config(args)
    variant = _resolve_config(args)
    config_mod.apply_tree(variant, ABLATIONS[args.name])
    variant.validate()

    out = _ensure_out(args.out)
    runs = {"base": base, args.name: variant}
    # One pairing manifest shared by both runs.
    images = config_mod.build_image_source(base)
    mask_pool = config_mod.build_mask_pool(base, seed_offset=base.eval.mask_seed)
    mask_set = ArrayMaskSet(mask_pool)
    pairing = build_eval_pairing(images.ids, mask_set.ids, base.eval.pairing_seed)
    write_pairing(pairing, os.path.join(out, "pairing.tsv"))

    reports = {}
    for name, cfg in runs.items():
        run_dir = os.path.join(out, name)
        checkpoint = _train_run(cfg, run_dir)
        model, _, _, train_config = load_model_for_eval(checkpoint)
        reports[name] = evaluate(
            model, images, mask_set, pairing,
            composite=cfg.eval.composite, fill=train_config.fill,
        )

    comparison = os.path.join(out, "comparison.csv")
    with open(comparison, "w", encoding="utf-8", newline="\n") as fh:
        first = True
        for name, report in reports.items():
            for line_no, line in enumerate(report.to_csv().splitlines()):
                if line_no == 0:
                    if first:
                        fh.write(f"run,{line}\n")
                        first = False
                    continue
                fh.write(f"{name},{line}\n")
    print(f"comparison written to {comparison}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorpaint",
        description="Semantic-prior image inpainting: training, evaluation, and tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", default=None, help="YAML configuration file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="dotted-key override, repeatable")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory or file")

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint over a fixed pairing")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--image-size", type=int, default=256)
    p.add_argument("--center-crop", action="store_true")
    p.add_argument("--no-composite", action="store_true")
    common(p, config=False)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("infer", help="inpaint one image with one mask")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--image-size", type=int, default=None,
                   help="resize input; default keeps native size")
    common(p, config=False)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("visualize-priors", help="k-means color map of the learned prior")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--image-size", type=int, default=None)
    p.add_argument("--clusters", type=int, default=8)
    common(p, config=False)
    p.set_defaults(fn=cmd_visualize_priors)

    p = sub.add_parser("make-masks", help="generate irregular stroke masks")
    p.add_argument("--count", type=int, default=10, help="masks per bucket")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--buckets", default=None, help="comma-separated bucket labels")
    common(p, config=False)
    p.set_defaults(fn=cmd_make_masks)

    p = sub.add_parser("make-pairing", help="build a deterministic image-mask pairing")
    p.add_argument("--images", required=True)
    p.add_argument("--masks", required=True)
    common(p, config=False)
    p.set_defaults(fn=cmd_make_pairing)

    p = sub.add_parser("ablate", help="train and compare an ablated variant")
    p.add_argument("--name", required=True, choices=sorted(ABLATIONS))
    common(p)
    p.set_defaults(fn=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DivergenceError as exc:
        print(f"error: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolError, PriorpaintError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
