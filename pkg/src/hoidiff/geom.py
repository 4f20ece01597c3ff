"""Rotation representations and rigid transforms.

Every function accepts arbitrary leading batch dimensions. Rotations act on
column vectors, so a point ``p`` maps to ``R @ p + t``.

The 6D representation stores the first two columns of a rotation matrix,
column-major: ``r[..., 0:3]`` is column 0 and ``r[..., 3:6]`` is column 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRotation

DEGENERACY_EPS = 1e-8
IDENTITY_ROT6 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def rot6_to_matrix(r):
    """Gram-Schmidt a 6D rotation into a proper rotation matrix.

    Args:
        r: array (..., 6).

    Returns:
        array (..., 3, 3) whose first column is the normalized first input
        column.

    Raises:
        DegenerateRotation: a column is (near) zero or the two are parallel.
    """
    r = np.asarray(r, dtype=float)
    # component-wise on contiguous arrays: much faster than vector slices for large batches
    x1, y1, z1, x2, y2, z2 = (np.ascontiguousarray(v) for v in np.moveaxis(r, -1, 0))
    n1 = np.sqrt(x1 * x1 + y1 * y1 + z1 * z1)
    n2 = np.sqrt(x2 * x2 + y2 * y2 + z2 * z2)
    if np.any(n1 <= DEGENERACY_EPS) or np.any(n2 <= DEGENERACY_EPS):
        raise DegenerateRotation("6D rotation has a zero-length column")
    x1, y1, z1 = x1 / n1, y1 / n1, z1 / n1
    d = x1 * x2 + y1 * y2 + z1 * z2
    x2, y2, z2 = x2 - d * x1, y2 - d * y1, z2 - d * z1
    nu = np.sqrt(x2 * x2 + y2 * y2 + z2 * z2)
    if np.any(nu <= DEGENERACY_EPS * n2):
        raise DegenerateRotation("6D rotation columns are parallel")
    x2, y2, z2 = x2 / nu, y2 / nu, z2 / nu
    x3, y3, z3 = y1 * z2 - z1 * y2, z1 * x2 - x1 * z2, x1 * y2 - y1 * x2
    out = np.stack([x1, x2, x3, y1, y2, y3, z1, z2, z3], axis=-1)
    return out.reshape(r.shape[:-1] + (3, 3))


def matrix_to_rot6(m):
    m = np.asarray(m, dtype=float)
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def matrix_to_quat(m):
    """Rotation matrix to unit quaternion (w, x, y, z) with w >= 0.

    When w is zero (half-turns) the first nonzero vector component is made
    positive so the result stays a fixed point of quat -> matrix -> quat.
    """
    m = np.asarray(m, dtype=float)
    m00, m11, m22 = m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]
    cand_abs = np.sqrt(np.maximum(0.0, np.stack([
        1.0 + m00 + m11 + m22,
        1.0 + m00 - m11 - m22,
        1.0 - m00 + m11 - m22,
        1.0 - m00 - m11 + m22,
    ], axis=-1)))
    # each row is the quaternion scaled by 4*q_k for the k-th pivot
    cands = np.stack([
        np.stack([cand_abs[..., 0] ** 2, m[..., 2, 1] - m[..., 1, 2],
                  m[..., 0, 2] - m[..., 2, 0], m[..., 1, 0] - m[..., 0, 1]], -1),
        np.stack([m[..., 2, 1] - m[..., 1, 2], cand_abs[..., 1] ** 2,
                  m[..., 1, 0] + m[..., 0, 1], m[..., 0, 2] + m[..., 2, 0]], -1),
        np.stack([m[..., 0, 2] - m[..., 2, 0], m[..., 1, 0] + m[..., 0, 1],
                  cand_abs[..., 2] ** 2, m[..., 2, 1] + m[..., 1, 2]], -1),
        np.stack([m[..., 1, 0] - m[..., 0, 1], m[..., 0, 2] + m[..., 2, 0],
                  m[..., 2, 1] + m[..., 1, 2], cand_abs[..., 3] ** 2], -1),
    ], axis=-2)
    best = np.argmax(cand_abs, axis=-1)
    denom = 2.0 * np.take_along_axis(cand_abs, best[..., None], -1)
    q = np.take_along_axis(cands, best[..., None, None], -2)[..., 0, :] / denom
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return canonical_quat(q)


def canonical_quat(q):
    q = np.asarray(q, dtype=float)
    nonzero = np.abs(q) > 1e-12
    first = np.argmax(nonzero, axis=-1)[..., None]
    sign = np.sign(np.take_along_axis(q, first, -1))
    return q * np.where(sign == 0, 1.0, sign)


def quat_to_matrix(q):
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
        np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
        np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
    ], axis=-2)


def geodesic_angle(a, b):
    """Angle in degrees of the relative rotation a^T b, in [0, 180]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tr = np.trace(np.swapaxes(a, -1, -2) @ b, axis1=-2, axis2=-1)
    return np.degrees(np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0)))


def axis_rotation(axis, angle):
    """Rotation about a principal axis ('x', 'y' or 'z'); angle in radians."""
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    o, z = np.ones_like(angle), np.zeros_like(angle)
    if axis == "x":
        rows = [[o, z, z], [z, c, -s], [z, s, c]]
    elif axis == "y":
        rows = [[c, z, s], [z, o, z], [-s, z, c]]
    elif axis == "z":
        rows = [[c, -s, z], [s, c, z], [z, z, o]]
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return np.stack([np.stack(r, -1) for r in rows], -2)


def random_rotation(rng, size=()):
    """Uniformly distributed rotation matrices via normalized Gaussian quaternions."""
    size = (size,) if isinstance(size, int) else tuple(size)
    q = rng.normal(size=size + (4,))
    return quat_to_matrix(q)


@dataclass(frozen=True)
class Se3:
    """Rigid transform with a 6D rotation and a translation in meters.

    Both fields may carry matching leading batch dimensions.
    """

    rot: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rot", np.asarray(self.rot, dtype=float))
        object.__setattr__(self, "trans", np.asarray(self.trans, dtype=float))

    @classmethod
    def identity(cls, shape=()):
        shape = tuple(shape)
        return cls(np.broadcast_to(IDENTITY_ROT6, shape + (6,)).copy(), np.zeros(shape + (3,)))

    @classmethod
    def from_matrix(cls, rot_matrix, trans):
        return cls(matrix_to_rot6(rot_matrix), trans)

    @classmethod
    def from_row(cls, row):
        """Parse a flat ``[rot6, trans]`` row (..., 9)."""
        row = np.asarray(row, dtype=float)
        return cls(row[..., :6], row[..., 6:9])

    def to_row(self):
        return np.concatenate([self.rot, self.trans], axis=-1)

    @property
    def matrix(self):
        return rot6_to_matrix(self.rot)

    def homogeneous(self):
        out = np.zeros(self.trans.shape[:-1] + (4, 4))
        out[..., :3, :3] = self.matrix
        out[..., :3, 3] = self.trans
        out[..., 3, 3] = 1.0
        return out

    def __getitem__(self, idx):
        return Se3(self.rot[idx], self.trans[idx])

    def __len__(self):
        return len(self.trans)

    def compose(self, other):
        return se3_compose(self, other)

    def inverse(self):
        return se3_inverse(self)

    def apply(self, pts):
        return se3_apply(self, pts)


def se3_compose(a: Se3, b: Se3) -> Se3:
    """Transform equivalent to applying ``b`` first, then ``a``."""
    ra, rb = a.matrix, b.matrix
    rot = ra @ rb
    trans = (ra @ b.trans[..., None])[..., 0] + a.trans
    return Se3.from_matrix(rot, trans)


def se3_inverse(a: Se3) -> Se3:
    rt = np.swapaxes(a.matrix, -1, -2)
    return Se3.from_matrix(rt, -(rt @ a.trans[..., None])[..., 0])


def se3_apply(a: Se3, pts):
    """Apply ``a`` to a point (3,) or to points (..., N, 3).

    Batch dims of ``a`` broadcast against the leading dims of ``pts``.
    """
    pts = np.asarray(pts, dtype=float)
    r = a.matrix
    if pts.ndim == 1:
        return r @ pts + a.trans
    return pts @ np.swapaxes(r, -1, -2) + a.trans[..., None, :]
