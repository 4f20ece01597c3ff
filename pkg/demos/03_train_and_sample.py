"""Train a small denoiser on synthetic carries, then sample and score it.

The defaults finish in a few minutes on one core; pass ``--steps 2000
--d-model 128 --layers 4`` for the desk-scale run (about half an hour).

Run with ``python demos/03_train_and_sample.py``.
"""
# %%
import argparse
import time

import numpy as np

from hoidiff.body import fk, load_skeleton
from hoidiff.config import RunConfig
from hoidiff.dataset import _Prepared, sample_batch
from hoidiff.metrics import evaluate, mpjpe
from hoidiff.network import Denoiser, object_descriptor
from hoidiff.pipeline import sample_like
from hoidiff.scenarios import ScenarioConfig, gen_scenario
from hoidiff.schedule import make_schedule
from hoidiff.training import AdamW, train

parser = argparse.ArgumentParser()
parser.add_argument("--steps", type=int, default=300)
parser.add_argument("--d-model", type=int, default=64)
parser.add_argument("--layers", type=int, default=2)
parser.add_argument("--sequences", type=int, default=8)
args = parser.parse_args()

# %% Data and config. W and T stay at their defaults.
skel = load_skeleton()
cfg = RunConfig(d_model=args.d_model, n_layers=args.layers, steps=args.steps)
seqs = [gen_scenario(ScenarioConfig(scenario="carry", seed=i), skel) for i in range(args.sequences)]
prepared = [_Prepared(skel, s, lambda t: object_descriptor(t, cfg.class_count)) for s in seqs]

# %% Training.
rng = np.random.default_rng(cfg.seed)
model = Denoiser.create(cfg.denoiser(), rng)
tcfg = cfg.train_config()
opt = AdamW(model.params, lr=tcfg.lr, weight_decay=tcfg.weight_decay)
start = time.perf_counter()


def report(step, loss, terms):
    if (step + 1) % 50 == 0:
        print(f"step {step + 1:5d}  loss {loss:.4f}  ({time.perf_counter() - start:.0f} s)")


history = train(model, opt, lambda r: sample_batch(prepared, cfg.W, tcfg.batch_size, r, True, 256),
                make_schedule(cfg.schedule, cfg.T), cfg.loss_weights(), skel, rng, tcfg, on_step=report)
print(f"loss {np.mean(history[:10]):.3f} -> {np.mean(history[-50:]):.3f}")

# %% Sample a training sequence from its ego track and compare with a frozen first pose.
seq = seqs[0]
out = sample_like(model, seq, cfg, skel, seed=0)
gt = fk(skel, seq.human)
print(evaluate(out, seq, skel, seed=0, config=cfg.to_dict()).to_json())
print(f"static first-frame baseline MPJPE: {mpjpe(np.broadcast_to(gt[:1], gt.shape), gt):.1f} mm")

# %% Sparse object observations are passed through and help the rest.
sparse = sample_like(model, seq, cfg, skel, seed=0, mode="sparse-o", pct=25)
print("E_c with 25% observed object frames:", evaluate(sparse, seq, skel).e_c)
