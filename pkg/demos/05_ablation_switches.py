# The three ablation switches, exercised in a few steps each.
#
#   use_prior=False : drop the distillation term ("without supervision").
#                     The prior loss logs exactly 0 and the 1x1 adaptation
#                     layer receives no gradient.
#   use_spade=False : concatenate the prior once in front of plain residual
#                     blocks instead of modulating every block.
#   teacher swap    : a stride-16 stand-in exercises the resampling adapter.

import io


from priorpaint.config import build_trainer, build_training_data, load_config

BASE = ["profile=desk", "train.max_steps=6", "data.synthetic_count=8"]


def run(tag, *extra):
    config = load_config(overrides=[*BASE, *extra])
    trainer = build_trainer(config)
    log = io.StringIO()
    trainer.fit(build_training_data(config), log_fh=log)
    last = log.getvalue().strip().split("\n")[-1].split(",")
    print(f"{tag:12s} step {last[0]}: l_img {last[1][:7]} l_prior {last[2][:7]} total {last[5][:8]}")
    return trainer


run("base")
ablated = run("wo-prior", "model.use_prior=false", "loss.use_prior=false")
adapter_grads = [p.grad for p in ablated.model.prior_adapter.parameters()]
print(f"             adaptation gradients: {[None if g is None else float(g.abs().max()) for g in adapter_grads]}")

run("concat", "model.use_spade=false")
run("alt-teacher", "teacher.name=standin-alt")
