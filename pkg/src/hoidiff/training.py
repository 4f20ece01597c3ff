"""AdamW optimization of the denoiser, with deterministic checkpoints."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import Batch
from .diffusion import forward_diffuse
from .errors import FormatError, NonFiniteLoss
from .losses import LossWeights, loss_total
from .network import Denoiser, DenoiserConfig
from .schedule import HUMAN, NoiseSchedule, sample_training_grid

CKPT_FORMAT = "ckpt/1"


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings.

    ``obs_prob`` is the chance that a training item has one modality
    partially revealed (timestamp 0 at a random subset of frames), which
    teaches the network to use sparse observations.
    """

    steps: int = 2000
    batch_size: int = 16
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    clip_norm: float | None = 1.0
    warmup: int = 0
    ramp_mix: float = 0.5
    max_context: int = 10
    obs_prob: float = 0.25

    def to_dict(self):
        return asdict(self)


class AdamW:
    """Adam with decoupled weight decay over a dict of parameter tensors."""

    def __init__(self, params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-4):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def grad_norm(self):
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float(np.sum(p.grad.astype(np.float64) ** 2))
        return float(np.sqrt(total))

    def step(self, clip_norm=None, lr=None):
        """Apply one update; returns the pre-clipping global gradient norm."""
        lr = self.lr if lr is None else lr
        norm = self.grad_norm()
        scale = 1.0
        if clip_norm is not None and norm > clip_norm:
            scale = clip_norm / (norm + 1e-12)
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad * np.asarray(scale, dtype=p.data.dtype)
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            upd = (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data *= 1.0 - lr * self.weight_decay
            p.data -= (lr * upd).astype(p.data.dtype)
        return norm


def noisy_inputs(batch: Batch, schedule: NoiseSchedule, rng, cfg: TrainConfig):
    """Sample timestamp grids and noise the clean batch.

    Returns:
        (h_t, o_t, c_t, grid) with grid (B, 3, W).
    """
    b, w = batch.h.shape[:2]
    T = schedule.T
    grid = np.stack([sample_training_grid(rng, w, T, cfg.ramp_mix, cfg.max_context) for _ in range(b)])
    for i in range(b):
        if rng.random() < cfg.obs_prob:
            choices = 1 if batch.motion_only[i] else 3
            m = int(rng.integers(choices))
            frac = rng.random()
            grid[i, m, rng.random(w) < frac] = 0
        if batch.motion_only[i]:
            grid[i, 1:] = T
    z = []
    for m, clean in enumerate((batch.h, batch.o, batch.c)):
        eps = rng.standard_normal(clean.shape)
        z.append(forward_diffuse(clean, grid[:, m], eps, schedule))
    return z[0], z[1], z[2], grid


def train_step(model: Denoiser, opt: AdamW, batch: Batch, schedule: NoiseSchedule, weights: LossWeights,
               skel, rng, cfg: TrainConfig, lr=None):
    """One optimization step. Raises NonFiniteLoss before touching parameters.

    Returns:
        (total loss, dict of per-term values, gradient norm).
    """
    h_t, o_t, c_t, grid = noisy_inputs(batch, schedule, rng, cfg)
    opt.zero_grad()
    pred = model.forward(h_t, o_t, c_t, batch.ego, grid, batch.descriptor)
    total, terms = loss_total(pred, (batch.h, batch.o, batch.c), skel, batch.verts, batch.foot_gate,
                              weights, motion_only=batch.motion_only)
    value = float(total.data)
    if not np.isfinite(value):
        raise NonFiniteLoss(f"loss became {value}")
    total.backward()
    norm = opt.step(cfg.clip_norm, lr)
    if not np.isfinite(norm):
        raise NonFiniteLoss(f"gradient norm became {norm}")
    return value, terms, norm


def lr_at(cfg: TrainConfig, step):
    if cfg.warmup > 0 and step < cfg.warmup:
        return cfg.lr * (step + 1) / cfg.warmup
    return cfg.lr


def save_checkpoint(path, model: Denoiser, opt: AdamW, rng, step, extra=None):
    """Write parameters, optimizer moments, rng state and step to an ``.npz`` file."""
    meta = {
        "format": CKPT_FORMAT,
        "step": int(step),
        "opt_t": int(opt.t),
        "model": model.cfg.to_dict(),
        "rng": rng.bit_generator.state,
        "extra": extra or {},
    }
    arrays = {"meta": np.array(json.dumps(meta))}
    for k, p in model.params.items():
        arrays[f"param/{k}"] = p.data
        arrays[f"m/{k}"] = opt.m[k]
        arrays[f"v/{k}"] = opt.v[k]
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path, opt_kwargs=None):
    """Restore ``(model, opt, rng, step, extra)`` from :func:`save_checkpoint` output."""
    try:
        data = np.load(path, allow_pickle=False)
        meta = json.loads(str(data["meta"]))
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"not a checkpoint: {exc}") from None
    if meta.get("format") != CKPT_FORMAT:
        raise FormatError(f"unsupported checkpoint format {meta.get('format')!r}")
    from . import autodiff as ad

    cfg = DenoiserConfig(**meta["model"])
    params = {k[len("param/"):]: ad.parameter(data[k].copy()) for k in data.files if k.startswith("param/")}
    model = Denoiser(cfg, params)
    opt = AdamW(params, **(opt_kwargs or {}))
    for k in params:
        opt.m[k] = data[f"m/{k}"].copy()
        opt.v[k] = data[f"v/{k}"].copy()
    opt.t = meta["opt_t"]
    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng"]
    return model, opt, rng, meta["step"], meta["extra"]


def train(model: Denoiser, opt: AdamW, batches, schedule, weights, skel, rng, cfg: TrainConfig,
          start_step=0, on_step=None):
    """Run ``cfg.steps - start_step`` steps; ``on_step(step, loss, terms)`` is called after each.

    ``batches`` is a callable ``rng -> Batch`` so that data sampling shares
    the training rng and a resumed run draws the same batches.
    """
    history = []
    for step in range(start_step, cfg.steps):
        batch = batches(rng)
        loss, terms, _ = train_step(model, opt, batch, schedule, weights, skel, rng, cfg, lr_at(cfg, step))
        history.append(loss)
        if on_step is not None:
            on_step(step, loss, terms)
    return history


__all__ = ["AdamW", "TrainConfig", "train_step", "train", "save_checkpoint", "load_checkpoint",
           "noisy_inputs", "HUMAN"]
