"""Six-term training objective on predicted clean windows."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .errors import ShapeMismatch
from .kinematics import fk_tensor, object_vertices_tensor

TERMS = ("h_n", "o_n", "i_n", "o_v", "h_j", "h_s")


@dataclass(frozen=True)
class LossWeights:
    h_n: float = 1.0
    o_n: float = 1.0
    i_n: float = 1.0
    o_v: float = 0.1
    h_j: float = 0.1
    h_s: float = 0.05

    def __post_init__(self):
        if any(v < 0 for v in asdict(self).values()):
            raise ValueError("loss weights must be nonnegative")

    def without_aux(self):
        return LossWeights(self.h_n, self.o_n, self.i_n, 0.0, 0.0, 0.0)

    def to_dict(self):
        return asdict(self)


def _masked_mean(per_item, mask):
    """Mean of per-item values over items where mask is set (0 if none)."""
    m = np.asarray(mask, dtype=per_item.dtype)
    count = m.sum()
    if count == 0:
        return ad.Tensor(np.zeros((), dtype=per_item.dtype))
    return (per_item * m).sum() * (1.0 / count)


def loss_total(pred, target, skel, verts, foot_gate, weights: LossWeights, motion_only=None):
    """Weighted loss and its per-term breakdown.

    Every norm is a per-frame (or per-joint / per-vertex) Euclidean norm,
    averaged over frames and then over batch items.

    Args:
        pred: (h, o, c) Tensors (B, W, 135 / 9 / 68).
        target: (h, o, c) arrays of the same shapes.
        skel: skeleton for forward kinematics.
        verts: array (B, V, 3) template vertices (ignored for motion-only items).
        foot_gate: array (B, W, 4) ground-truth foot-floor labels.
        weights: LossWeights.
        motion_only: bool array (B,); object and contact terms skip these items.

    Returns:
        (total Tensor, dict of term name -> float).
    """
    h, o, c = pred
    th, to, tc = (np.asarray(a, dtype=h.dtype) for a in target)
    if h.shape != th.shape or o.shape != to.shape or c.shape != tc.shape:
        raise ShapeMismatch("prediction and target shapes differ")
    b, w = th.shape[:2]
    if motion_only is None:
        motion_only = np.zeros(b, dtype=bool)
    has_obj = ~np.asarray(motion_only, dtype=bool)

    dh = h - th
    l_h_n = (ad.norm(dh[..., 9:]) + ad.norm(dh[..., :9])).mean(axis=-1)
    l_o_n = ad.norm(o - to).mean(axis=-1)
    l_i_n = ad.norm(c - tc).mean(axis=-1)

    _, joints = fk_tensor(skel, h)
    _, gt_joints = fk_tensor(skel, ad.Tensor(th))
    l_h_j = ad.norm(joints - gt_joints.data).mean(axis=(-1, -2))

    feet = joints[:, :, skel.foot_indices]
    vel = feet[:, 1:] - feet[:, :-1]
    gate = np.asarray(foot_gate, dtype=h.dtype)[:, 1:, :, None]
    l_h_s = ad.norm(vel * gate).mean(axis=(-1, -2)) if w > 1 else l_h_n * 0.0

    terms = {
        "h_n": l_h_n.mean(),
        "o_n": _masked_mean(l_o_n, has_obj),
        "i_n": _masked_mean(l_i_n, has_obj),
        "h_j": l_h_j.mean(),
        "h_s": l_h_s.mean(),
    }
    if has_obj.any() and weights.o_v > 0:
        sel = np.nonzero(has_obj)[0]
        v = np.asarray(verts, dtype=h.dtype)[sel]
        pv = object_vertices_tensor(o[sel], v)
        gv = object_vertices_tensor(ad.Tensor(to[sel]), v).data
        per = ad.norm(pv - gv).mean(axis=(-1, -2))
        terms["o_v"] = per.mean()
    else:
        terms["o_v"] = ad.Tensor(np.zeros((), dtype=h.dtype))

    wd = weights.to_dict()
    total = None
    for name in TERMS:
        if wd[name] == 0:
            continue
        part = terms[name] * wd[name]
        total = part if total is None else total + part
    if total is None:
        total = ad.Tensor(np.zeros((), dtype=h.dtype))
    return total, {name: float(terms[name].data) for name in TERMS}
