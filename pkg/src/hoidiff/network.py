"""Tri-variate denoising transformer.

One token per frame per modality plus one global object token, laid out as
``[global, h_0 .. h_{W-1}, o_0 .. o_{W-1}, c_0 .. c_{W-1}]``. Every modality
token carries its own diffusion timestamp, which is added to the token and
also drives adaptive layer-norm scale/shift/gate in every block.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .body import HUMAN_WIDTH, N_CONTACTS, OBJECT_WIDTH, ObjectTemplate
from .canon import EGO_WIDTH
from .errors import WidthMismatch

GEOM_FEATURES = 64
RADIAL_BINS = GEOM_FEATURES - 12
RADIAL_MAX = 1.0


@dataclass(frozen=True)
class DenoiserConfig:
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    mlp_ratio: int = 4
    window: int = 60
    T: int = 100
    class_count: int = 33
    use_contact: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")

    @property
    def descriptor_width(self):
        return self.class_count + GEOM_FEATURES

    def to_dict(self):
        return asdict(self)


def object_descriptor(tpl: ObjectTemplate | None, class_count=33):
    """One-hot class followed by 64 geometric features of the template.

    Features: 6 unique entries of the vertex covariance, its 3 eigenvalues
    (descending), 3 bounding-box extents, and a 52-bin histogram of vertex
    distances to the centroid over [0, 1] m (fractions). Motion-only
    sequences (no object) get all zeros.
    """
    out = np.zeros(class_count + GEOM_FEATURES)
    if tpl is None:
        return out
    out[tpl.class_id] = 1.0
    v = tpl.vertices - tpl.vertices.mean(axis=0)
    cov = v.T @ v / len(v)
    iu = np.triu_indices(3)
    eig = np.sort(np.linalg.eigvalsh(cov))[::-1]
    extents = v.max(axis=0) - v.min(axis=0)
    radii = np.linalg.norm(v, axis=1)
    hist, _ = np.histogram(np.clip(radii, 0, RADIAL_MAX - 1e-12), bins=RADIAL_BINS, range=(0, RADIAL_MAX))
    geom = np.concatenate([cov[iu], eig, extents, hist / len(v)])
    out[class_count:] = geom
    return out


def _sinusoid(n, d):
    pos = np.arange(n)[:, None]
    freq = np.exp(-np.log(10000.0) * np.arange(0, d, 2) / d)
    out = np.zeros((n, d))
    out[:, 0::2] = np.sin(pos * freq)
    out[:, 1::2] = np.cos(pos * freq)
    return out


def init_params(cfg: DenoiserConfig, rng):
    """Fresh parameters: Xavier-uniform projections, zeroed modulation and heads."""
    d = cfg.d_model
    dt = np.dtype(cfg.dtype)

    def xavier(fan_in, fan_out):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    p = {}

    def linear(name, fan_in, fan_out, zero=False):
        p[f"{name}.w"] = np.zeros((fan_in, fan_out)) if zero else xavier(fan_in, fan_out)
        p[f"{name}.b"] = np.zeros(fan_out)

    linear("emb_h", HUMAN_WIDTH, d)
    linear("emb_o", OBJECT_WIDTH, d)
    if cfg.use_contact:
        linear("emb_c", N_CONTACTS, d)
    linear("emb_ego", EGO_WIDTH, d)
    linear("emb_global", cfg.descriptor_width, d)
    p["time_emb"] = _sinusoid(cfg.T + 1, d)
    p["mod_emb"] = rng.normal(0, 0.02, size=(3, d))
    p["pos_emb"] = 0.1 * _sinusoid(cfg.window, d)
    p["global_cond"] = np.zeros(d)
    hidden = cfg.mlp_ratio * d
    for i in range(cfg.n_layers):
        linear(f"blocks.{i}.mod", d, 6 * d, zero=True)
        linear(f"blocks.{i}.qkv", d, 3 * d)
        linear(f"blocks.{i}.proj", d, d)
        linear(f"blocks.{i}.fc1", d, hidden)
        linear(f"blocks.{i}.fc2", hidden, d)
    linear("final.mod", d, 2 * d, zero=True)
    linear("head_h", d, HUMAN_WIDTH, zero=True)
    linear("head_o", d, OBJECT_WIDTH, zero=True)
    if cfg.use_contact:
        linear("head_c", d, N_CONTACTS, zero=True)
    return {k: ad.parameter(v.astype(dt)) for k, v in p.items()}


class Denoiser:
    """Parameters plus the forward pass that predicts clean (h, o, c) windows."""

    def __init__(self, cfg: DenoiserConfig, params):
        self.cfg = cfg
        self.params = params

    @classmethod
    def create(cls, cfg: DenoiserConfig, rng):
        return cls(cfg, init_params(cfg, rng))

    def parameters(self):
        return list(self.params.values())

    def n_parameters(self):
        return int(sum(p.data.size for p in self.params.values()))

    def _linear(self, x, name):
        return x @ self.params[f"{name}.w"] + self.params[f"{name}.b"]

    def build_tokens(self, h_t, o_t, c_t, ego, grid, od):
        """Embed noisy modality rows, timestamps and conditioning into tokens.

        Args:
            h_t, o_t, c_t: arrays (B, W, 135), (B, W, 9), (B, W, 68).
            ego: array (B, W, 54) canonical three-point conditioning.
            grid: int array (B, 3, W) of timestamps.
            od: array (B, C + 64) object descriptors.

        Returns:
            (tokens, cond) Tensors of shape (B, n_tokens, d_model).
        """
        cfg = self.cfg
        dt = np.dtype(cfg.dtype)
        h_t, o_t, c_t, ego, od = (np.asarray(a, dtype=dt) for a in (h_t, o_t, c_t, ego, od))
        grid = np.asarray(grid)
        b, w = h_t.shape[:2]
        if not (o_t.shape[:2] == c_t.shape[:2] == ego.shape[:2] == (b, w)) or grid.shape != (b, 3, w):
            raise WidthMismatch("modality rows, ego rows and timestamp grid disagree on B or W")
        if w > cfg.window:
            raise WidthMismatch(f"window {w} exceeds the model's {cfg.window}")
        p = self.params
        e_ego = self._linear(Tensor(ego), "emb_ego")
        time = ad.take(p["time_emb"], grid)
        frame = p["pos_emb"][:w]
        rows = [(h_t, "emb_h", 0), (o_t, "emb_o", 1)]
        if cfg.use_contact:
            rows.append((c_t, "emb_c", 2))
        toks, conds = [], []
        for values, name, m in rows:
            toks.append(self._linear(Tensor(values), name) + e_ego + time[:, m] + p["mod_emb"][m] + frame)
            conds.append(time[:, m])
        g = self._linear(Tensor(od), "emb_global").reshape((b, 1, cfg.d_model))
        g_cond = p["global_cond"].reshape((1, 1, cfg.d_model)) + np.zeros((b, 1, cfg.d_model), dtype=dt)
        return ad.concat([g] + toks, axis=1), ad.concat([g_cond] + conds, axis=1)

    def _attention(self, x, i):
        cfg = self.cfg
        b, n, d = x.shape
        hd = d // cfg.n_heads
        qkv = self._linear(x, f"blocks.{i}.qkv").reshape((b, n, 3, cfg.n_heads, hd))
        qkv = ad.transpose(qkv, (2, 0, 3, 1, 4))
        q, k, v = qkv[0], qkv[1], qkv[2]
        att = ad.softmax((q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(hd)), axis=-1)
        out = ad.transpose(att @ v, (0, 2, 1, 3)).reshape((b, n, d))
        return self._linear(out, f"blocks.{i}.proj")

    def denoise_forward(self, tokens, cond):
        """Run the transformer; returns predicted clean (h0, o0, c0) Tensors."""
        cfg = self.cfg
        d = cfg.d_model
        sc = ad.silu(cond)
        x = tokens
        for i in range(cfg.n_layers):
            mod = self._linear(sc, f"blocks.{i}.mod")
            shift1, scale1, gate1 = mod[..., 0:d], mod[..., d:2 * d], mod[..., 2 * d:3 * d]
            shift2, scale2, gate2 = mod[..., 3 * d:4 * d], mod[..., 4 * d:5 * d], mod[..., 5 * d:6 * d]
            h = ad.layer_norm(x) * (scale1 + 1.0) + shift1
            x = x + gate1 * self._attention(h, i)
            h = ad.layer_norm(x) * (scale2 + 1.0) + shift2
            h = self._linear(ad.gelu(self._linear(h, f"blocks.{i}.fc1")), f"blocks.{i}.fc2")
            x = x + gate2 * h
        mod = self._linear(sc, "final.mod")
        y = ad.layer_norm(x) * (mod[..., d:2 * d] + 1.0) + mod[..., 0:d]
        w = (x.shape[1] - 1) // (3 if cfg.use_contact else 2)
        h0 = self._linear(y[:, 1:1 + w], "head_h")
        o0 = self._linear(y[:, 1 + w:1 + 2 * w], "head_o")
        if cfg.use_contact:
            c0 = self._linear(y[:, 1 + 2 * w:1 + 3 * w], "head_c")
        else:
            c0 = Tensor(np.zeros((x.shape[0], w, N_CONTACTS), dtype=x.dtype))
        return h0, o0, c0

    def forward(self, h_t, o_t, c_t, ego, grid, od):
        return self.denoise_forward(*self.build_tokens(h_t, o_t, c_t, ego, grid, od))

    def predict(self, window):
        """Inference on a single :class:`hoidiff.conveyor.Window`; returns arrays."""
        with ad.no_grad():
            h0, o0, c0 = self.forward(
                window.h[None], window.o[None], window.c[None], window.ego[None],
                window.grid[None], window.descriptor[None],
            )
        return (h0.data[0].astype(float), o0.data[0].astype(float), c0.data[0].astype(float))
