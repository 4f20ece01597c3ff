"""End-to-end helpers: prepare conditioning from a reference sequence and sample."""
from __future__ import annotations

import numpy as np

from .body import Skeleton
from .config import RunConfig
from .conveyor import run_offline
from .dataset import InteractionSequence, world_ego
from .errors import InvalidConfig
from .network import object_descriptor
from .schedule import make_schedule

MODES = ("full", "sparse-h", "sparse-o", "contact-cond")
_MODE_KEY = {"sparse-h": "h", "sparse-o": "o", "contact-cond": "c"}


def observation_mask(n, pct, rng):
    """Boolean (n,) mask with ``round(pct / 100 * n)`` frames set, chosen uniformly."""
    if not 0 <= pct <= 100:
        raise InvalidConfig(f"percentage {pct} outside [0, 100]")
    k = int(np.floor(pct / 100.0 * n + 0.5))
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=k, replace=False)] = True
    return mask


def observations(ref: InteractionSequence, mode, pct, seed):
    """Observed world-frame rows for a sampling mode, as ``run_offline`` expects."""
    if mode not in MODES:
        raise InvalidConfig(f"unknown mode {mode!r}; choose from {MODES}")
    if mode == "full":
        return {}
    key = _MODE_KEY[mode]
    if key != "h" and ref.motion_only:
        raise InvalidConfig(f"mode {mode} needs a reference sequence with an object")
    mask = observation_mask(len(ref), pct, np.random.default_rng(seed))
    rows = {"h": lambda: ref.human.to_row(), "o": lambda: ref.obj.to_row(),
            "c": lambda: ref.contacts.astype(float)}[key]()
    return {key: (mask, rows)}


def sample_like(model, ref: InteractionSequence, cfg: RunConfig, skel: Skeleton, seed, mode="full", pct=0.0,
                K=None, guidance=None, on_tick=None) -> InteractionSequence:
    """Predict a sequence from the ego track (and optional observations) of ``ref``.

    The object template of ``ref`` is assumed known, as at inference time.
    """
    schedule = make_schedule(cfg.schedule, cfg.T)
    ego = world_ego(skel, ref)
    obs = observations(ref, mode, pct, seed)
    tpl = ref.template
    out = run_offline(model, ego, schedule, skel, W=cfg.W, K=cfg.K if K is None else K, seed=seed,
                      template=tpl, descriptor=object_descriptor(tpl, cfg.class_count),
                      guidance=cfg.guidance_config() if guidance is None else guidance,
                      observed=obs, canonical=cfg.canonical, fps=ref.fps, on_tick=on_tick)
    out.meta = {"seed": int(seed), "mode": mode, "sparse_pct": float(pct), "config": cfg.to_dict()}
    return out
