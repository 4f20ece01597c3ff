"""Small shared builders for the test suite."""
import numpy as np

from hoidiff.body import load_skeleton
from hoidiff.dataset import _Prepared, sample_batch
from hoidiff.network import Denoiser, DenoiserConfig, object_descriptor
from hoidiff.scenarios import ScenarioConfig, gen_scenario

TINY = dict(d_model=16, n_layers=1, n_heads=2, mlp_ratio=2, window=8, T=10, class_count=33)


def tiny_model(seed=0, dtype="float64", **kw):
    cfg = DenoiserConfig(**{**TINY, "dtype": dtype, **kw})
    return Denoiser.create(cfg, np.random.default_rng(seed))


def randomize_heads(model, rng, scale=0.1):
    """Give zero-initialized weights random values so every path carries signal."""
    for k, p in model.params.items():
        if not p.data.any():
            p.data[...] = rng.normal(scale=scale, size=p.data.shape)


_CACHE = {}


def scenario(kind="carry", seed=0, frames=60, n_vertices=64):
    key = (kind, seed, frames, n_vertices)
    if key not in _CACHE:
        cfg = ScenarioConfig(scenario=kind, frames=frames, seed=seed, n_vertices=n_vertices,
                             min_frames=min(60, frames))
        _CACHE[key] = gen_scenario(cfg, load_skeleton())
    return _CACHE[key]


def tiny_batch(W=8, B=2, seed=0, seqs=None, canonical=True):
    skel = load_skeleton()
    seqs = seqs or [scenario("carry", 0), scenario("push", 1)]
    prepared = [_Prepared(skel, s, lambda t: object_descriptor(t, 33)) for s in seqs]
    nv = max([len(s.template.vertices) for s in seqs if not s.motion_only] or [1])
    return sample_batch(prepared, W, B, np.random.default_rng(seed), canonical, nv)
