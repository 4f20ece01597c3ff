"""Head-centric canonicalization and three-point ego conditioning.

Ego rows are 54 wide: ``[rot (3 x 6D), rot_vel (3 x 6D), xyz (3 x 3), vel (3 x 3)]``
for the head, left wrist and right wrist, in that order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import HumanFrame, Skeleton, fk_global
from .errors import DegenerateHeading, SequenceTooShort
from .geom import IDENTITY_ROT6, Se3, matrix_to_rot6, se3_compose, se3_inverse

EGO_WIDTH = 54
EGO_ROT = slice(0, 18)
EGO_ROT_VEL = slice(18, 36)
EGO_XYZ = slice(36, 45)
EGO_VEL = slice(45, 54)
DEFAULT_DT = 1.0 / 30.0
UP = np.array([0.0, 0.0, 1.0])


def gravity_align(head: Se3) -> Se3:
    """Yaw-only version of a head pose: keep the translation, drop pitch and roll.

    The heading is the head's forward (x) axis projected onto the floor plane.
    """
    fwd = head.matrix[..., :, 0]
    horiz = fwd[..., :2]
    norm = np.linalg.norm(horiz, axis=-1, keepdims=True)
    if np.any(norm <= 1e-6):
        raise DegenerateHeading("head forward axis is parallel to gravity")
    c, s = (horiz / norm)[..., 0], (horiz / norm)[..., 1]
    zero = np.zeros_like(c)
    rot6 = np.stack([c, s, zero, -s, c, zero], axis=-1)
    return Se3(rot6, head.trans.copy())


@dataclass(frozen=True)
class Anchor:
    """Gravity-aligned head pose that defines a window's coordinate frame."""

    transform: Se3

    @classmethod
    def from_head(cls, head: Se3):
        return cls(gravity_align(head))

    @classmethod
    def identity(cls):
        return cls(Se3.identity())

    @property
    def matrix(self):
        r = self.transform.rot
        if np.any(r[..., 2] != 0) or np.any(r[..., 5] != 0):
            return self.transform.matrix
        # yaw-only: build it directly so the height axis is exactly up
        c, s = r[..., 0], r[..., 1]
        n = np.hypot(c, s)
        c, s = c / n, s / n
        zero, one = np.zeros_like(c), np.ones_like(c)
        return np.stack([np.stack([c, -s, zero], -1), np.stack([s, c, zero], -1),
                         np.stack([zero, zero, one], -1)], -2)

    @property
    def height(self):
        return float(self.transform.trans[2])


def canonicalize(anchor: Anchor, pose: Se3) -> Se3:
    return se3_compose(se3_inverse(anchor.transform), pose)


def decanonicalize(anchor: Anchor, pose: Se3) -> Se3:
    return se3_compose(anchor.transform, pose)


def transform_rows(g: Se3, rows):
    """Left-apply a rigid transform to ``[rot6, trans]`` rows (..., 9).

    Linear in the row, so it is also valid for noisy (non-orthonormal) rows.
    """
    rows = np.asarray(rows, dtype=float)
    r = g.matrix
    out = np.empty_like(rows)
    out[..., 0:3] = rows[..., 0:3] @ r.T
    out[..., 3:6] = rows[..., 3:6] @ r.T
    out[..., 6:9] = rows[..., 6:9] @ r.T + g.trans
    return out


def transform_human_rows(g: Se3, rows):
    """Re-express human rows (..., 135); only the root part moves."""
    out = np.array(rows, dtype=float)
    out[..., :9] = transform_rows(g, out[..., :9])
    return out


def transform_ego(g: Se3, ego):
    """Re-express ego rows (..., 54) under a rigid change of frame."""
    ego = np.asarray(ego, dtype=float)
    r = g.matrix
    lead = ego.shape[:-1]
    out = ego.copy()
    rot = ego[..., EGO_ROT].reshape(lead + (6, 3)) @ r.T
    out[..., EGO_ROT] = rot.reshape(lead + (18,))
    xyz = ego[..., EGO_XYZ].reshape(lead + (3, 3)) @ r.T + g.trans
    out[..., EGO_XYZ] = xyz.reshape(lead + (9,))
    vel = ego[..., EGO_VEL].reshape(lead + (3, 3)) @ r.T
    out[..., EGO_VEL] = vel.reshape(lead + (9,))
    return out


def head_pose(skel: Skeleton, frame: HumanFrame) -> Se3:
    rots, pos = fk_global(skel, frame)
    h = skel.index("head")
    return Se3.from_matrix(rots[..., h, :, :], pos[..., h, :])


def ego_condition(skel: Skeleton, seq: HumanFrame, anchor: Anchor, dt=DEFAULT_DT):
    """Three-point conditioning for a sequence of frames.

    Args:
        skel: skeleton used for forward kinematics.
        seq: HumanFrame with a leading frame axis of length N >= 2.
        anchor: frame in which positions and orientations are expressed.
        dt: seconds between frames.

    Returns:
        array (N, 54). Velocities are backward differences divided by ``dt``;
        frame 0 repeats frame 1.
    """
    n = seq.joint_rot.shape[0]
    if n < 2:
        raise SequenceTooShort("ego conditioning needs at least 2 frames")
    rots, pos = fk_global(skel, seq)
    idx = skel.ego_indices
    ra = anchor.matrix
    rot = ra.T @ rots[:, idx]
    xyz = (pos[:, idx] - anchor.transform.trans) @ ra
    vel = np.empty_like(xyz)
    vel[1:] = (xyz[1:] - xyz[:-1]) / dt
    vel[0] = vel[1]
    rel = np.swapaxes(rot[:-1], -1, -2) @ rot[1:]
    rot_vel = np.empty((n, 3, 6))
    rot_vel[1:] = (matrix_to_rot6(rel) - IDENTITY_ROT6) / dt
    rot_vel[0] = rot_vel[1]
    return np.concatenate([
        matrix_to_rot6(rot).reshape(n, 18),
        rot_vel.reshape(n, 18),
        xyz.reshape(n, 9),
        vel.reshape(n, 9),
    ], axis=-1)
