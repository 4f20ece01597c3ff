"""Streaming inference with an oracle denoiser.

The oracle returns ground truth, so whatever comes out the other end
checks the bookkeeping: timestamp ramps, re-anchoring and latency.

Run with ``python demos/02_conveyor_with_oracle.py``.
"""
# %%
import numpy as np

from hoidiff.body import fk, load_skeleton
from hoidiff.conveyor import OracleDenoiser, conveyor_init, run_offline
from hoidiff.dataset import ego_head_pose, world_ego
from hoidiff.network import object_descriptor
from hoidiff.scenarios import ScenarioConfig, gen_scenario
from hoidiff.schedule import conveyor_ramp, make_schedule

skel = load_skeleton()
schedule = make_schedule("cosine", 100)
seq = gen_scenario(ScenarioConfig(scenario="push", frames=90, seed=1), skel)
ego = world_ego(skel, seq)
W, K = 30, 5

# %% The ramp: K clean context slots, then noise levels rising towards the tail.
print("ramp:", conveyor_ramp(W, schedule.T, K))

# %% Drive the conveyor by hand for a few ticks.
conv = conveyor_init(ego_head_pose(ego[0]), schedule, K, np.random.default_rng(0), skel, W=W,
                     template=seq.template, descriptor=object_descriptor(seq.template))
oracle = OracleDenoiser(seq)
for n in range(W):
    conv.push(ego[n])
    frame = conv.tick(oracle)
    if frame is not None:
        print(f"tick {n + 1}: frame {frame.frame_id} out after {n + 1 - frame.frame_id} ticks, "
              f"chain {frame.chain[0]} ... {frame.chain[-1]}")
        break

# %% Whole sequence, re-anchored every tick, back in world coordinates.
out = run_offline(oracle, ego, schedule, skel, W=W, K=K, template=seq.template,
                  descriptor=object_descriptor(seq.template))
print("max joint error (m):", np.abs(fk(skel, out.human) - fk(skel, seq.human)).max())
print("max object error (m):", np.abs(out.obj.trans - seq.obj.trans).max())
print("contacts identical:", np.array_equal(out.contacts, seq.contacts))
