"""Forward noising, x0-prediction reverse jumps and contact guidance.

Modality tensors are arrays (..., W, D) with per-frame integer timestamps
(..., W). Widths: human 135, object 9, contact 68.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .body import N_BODY_POINTS, Skeleton
from .canon import Anchor
from .errors import ShapeMismatch
from .kinematics import body_points_tensor, fk_tensor, object_vertices_tensor
from .schedule import NoiseSchedule


def _check(z, t, eps):
    z = np.asarray(z)
    t = np.asarray(t)
    eps = np.asarray(eps)
    if z.shape != eps.shape or z.shape[:-1] != t.shape:
        raise ShapeMismatch(f"rows {z.shape}, timestamps {t.shape}, noise {eps.shape}")
    return z, t, eps


def forward_diffuse(z0, t, eps, schedule: NoiseSchedule):
    """Closed-form q(z_t | z_0), row by row; rows with t = 0 come back untouched."""
    z0, t, eps = _check(z0, t, eps)
    a = schedule.sqrt_ab[t][..., None].astype(z0.dtype)
    b = schedule.sqrt_1mab[t][..., None].astype(z0.dtype)
    return np.where(t[..., None] == 0, z0, a * z0 + b * eps)


def reverse_jump(z0_hat, t_to, eps, schedule: NoiseSchedule):
    """Re-noise a clean prediction to an arbitrary lower timestamp per row.

    This is the x0-parameterized reverse step generalized from t - 1 to any
    target; a target of 0 returns the prediction itself.
    """
    return forward_diffuse(z0_hat, t_to, eps, schedule)


@dataclass(frozen=True)
class GuidanceConfig:
    scale: float = 1e-2
    enabled: bool = True
    tau_c: float = 0.05
    tau_f: float = 0.05

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("guidance scale must be positive")


def guidance_loss(h0, o0, c0, skel: Skeleton, verts=None, floor_height=0.0):
    """Contact-consistency energy of a predicted window.

    Sum over frames of the min-distance from every active body point to the
    object surface, plus the distance to the floor of every active foot
    joint. Labels count as active above 0.5.

    Args:
        h0: Tensor (W, 135) human rows in the window frame.
        o0: Tensor (W, 9) object rows, or None for motion-only windows.
        c0: array (W, 68) contact values.
        skel: skeleton.
        verts: template vertices (V, 3) or None.
        floor_height: floor z in the window frame.

    Returns:
        scalar Tensor.
    """
    c0 = np.asarray(c0)
    body_on = c0[..., :N_BODY_POINTS] > 0.5
    foot_on = c0[..., N_BODY_POINTS:] > 0.5
    rots, pos = fk_tensor(skel, h0)
    total = ad.Tensor(np.zeros((), dtype=h0.dtype))
    if foot_on.any():
        heights = pos[..., skel.foot_indices, 2] - floor_height
        total = total + (ad.abs_(heights) * foot_on.astype(h0.dtype)).sum()
    if verts is not None and o0 is not None and body_on.any():
        frames, points = np.nonzero(body_on)
        pts = body_points_tensor(skel, rots, pos)[frames, points]
        v = object_vertices_tensor(o0, verts)[frames]
        diff = pts.reshape((len(frames), 1, 3)) - v
        d2 = (diff * diff).sum(axis=-1)
        total = total + ad.sqrt(ad.min_reduce(d2, axis=-1)).sum()
    return total


def guided_correction(h0, o0, c0, skel, anchor: Anchor, cfg: GuidanceConfig, verts=None,
                      h_active=None, o_active=None):
    """One gradient step on the guidance energy for predicted clean rows.

    Contacts are never modified. Rows flagged inactive (already clean or
    observed) are left as they are.

    Returns:
        (h0', o0') arrays; identical to the inputs when no label is active or
        guidance is disabled.
    """
    h0 = np.asarray(h0)
    c0 = np.asarray(c0)
    o0 = None if o0 is None else np.asarray(o0)
    if not cfg.enabled or not (c0 > 0.5).any():
        return h0, o0
    h_t = ad.parameter(h0.copy())
    o_t = None if o0 is None or verts is None else ad.parameter(o0.copy())
    loss = guidance_loss(h_t, o_t, c0, skel, verts, floor_height=-anchor.height)
    if not loss.requires_grad:
        return h0, o0
    loss.backward()
    h_new, o_new = h0, o0
    if h_t.grad is not None and np.all(np.isfinite(h_t.grad)):
        step = cfg.scale * h_t.grad
        if h_active is not None:
            step = step * np.asarray(h_active, dtype=h0.dtype)[:, None]
        h_new = h0 - step
    if o_t is not None and o_t.grad is not None and np.all(np.isfinite(o_t.grad)):
        step = cfg.scale * o_t.grad
        if o_active is not None:
            step = step * np.asarray(o_active, dtype=o0.dtype)[:, None]
        o_new = o0 - step
    return h_new, o_new
