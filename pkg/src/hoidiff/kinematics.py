"""Differentiable decoding of modality rows into joints, body points and vertices.

These mirror :func:`hoidiff.body.fk_global` and friends but operate on
autodiff tensors so that losses and guidance can push gradients back into
the raw 6D + translation rows.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .body import N_JOINTS, Skeleton


def fk_tensor(skel: Skeleton, human):
    """Forward kinematics on human rows.

    Args:
        skel: skeleton.
        human: Tensor (..., 135) of ``[root rot6, root trans, 21 x rot6]``.

    Returns:
        (rots, pos): Tensors (..., 22, 3, 3) and (..., 22, 3).
    """
    lead = human.shape[:-1]
    dtype = human.dtype
    r_root = ad.rot6_to_matrix(human[..., 0:6])
    r_local = ad.rot6_to_matrix(human[..., 9:].reshape(lead + (21, 6)))
    rots = [r_root]
    pos = [human[..., 6:9]]
    for j in range(1, N_JOINTS):
        p = skel.parent[j]
        rots.append(rots[p] @ r_local[..., j - 1, :, :])
        off = skel.offset[j].astype(dtype).reshape(3, 1)
        pos.append(pos[p] + (rots[p] @ off).reshape(lead + (3,)))
    return ad.stack(rots, axis=-3), ad.stack(pos, axis=-2)


def body_points_tensor(skel: Skeleton, rots, pos):
    """Body contact anchors (..., 64, 3) from FK tensors."""
    j = skel.point_joint
    is_root = skel.parent[j] < 0
    p = np.where(is_root, j, skel.parent[j])
    frac = np.where(is_root, 1.0, skel.point_frac)
    local = ((1.0 - frac)[:, None] * skel.offset[j] + skel.point_offset).astype(pos.dtype)
    r_p = rots[..., p, :, :]
    moved = (r_p @ local[:, :, None]).reshape(r_p.shape[:-1])
    return pos[..., p, :] + moved


def object_vertices_tensor(obj, verts):
    """Pose template vertices by object rows.

    Args:
        obj: Tensor (..., 9) of ``[rot6, trans]``.
        verts: array (V, 3) or (..., V, 3) in the template frame.

    Returns:
        Tensor (..., V, 3).
    """
    r = ad.rot6_to_matrix(obj[..., 0:6])
    t = obj[..., 6:9]
    verts = np.asarray(verts, dtype=obj.dtype)
    if verts.ndim == 2:
        posed = ad.Tensor(verts) @ r.swapaxes(-1, -2)
    else:
        extra = r.ndim - 2 - (verts.ndim - 2)
        v = verts.reshape(verts.shape[:-2] + (1,) * extra + verts.shape[-2:])
        posed = ad.Tensor(v) @ r.swapaxes(-1, -2)
    return posed + t.reshape(t.shape[:-1] + (1, 3))
