"""Evaluation metrics for predicted interaction sequences.

Units: MPJPE and MPJVE in millimeters, E_v2v and E_c in centimeters,
rotation error in degrees, quaternion error as a unitless L1 distance.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .body import FOOT_JOINTS, ObjectTemplate, Skeleton, fk, load_skeleton
from .errors import SequenceTooShort, ShapeMismatch
from .geom import Se3, geodesic_angle, matrix_to_quat, rot6_to_matrix

FIELDS = ("mpjpe", "mpjve", "fc", "e_v2v", "e_c", "rot_diff", "q_diff")


def _same_shape(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mpjpe(pred, gt):
    """Mean per-joint position error in mm for joints (N, J, 3) in meters."""
    pred, gt = _same_shape(pred, gt)
    return float(np.linalg.norm(pred - gt, axis=-1).mean() * 1000.0)


def mpjve(pred, gt):
    """Mean per-joint error of frame-to-frame displacements, mm (no fps scaling)."""
    pred, gt = _same_shape(pred, gt)
    if pred.shape[0] < 2:
        raise SequenceTooShort("velocity error needs at least 2 frames")
    dv = np.diff(pred, axis=0) - np.diff(gt, axis=0)
    return float(np.linalg.norm(dv, axis=-1).mean() * 1000.0)


def fc(joints, foot_indices=None, dist_thresh=0.10, height_thresh=0.05):
    """Fraction of frames with at least one grounded foot joint.

    A frame counts when either ankle is at most ``dist_thresh`` above the
    floor or either foot joint is at most ``height_thresh`` above it.

    Args:
        joints: (N, J, 3) positions with the floor at z = 0, or (N, 4, 3)
            already restricted to (left ankle, right ankle, left foot, right foot).
        foot_indices: indices of those four joints in J; defaults to the
            default skeleton's.
    """
    joints = np.asarray(joints, dtype=float)
    if joints.shape[-2] != 4:
        if foot_indices is None:
            foot_indices = [load_skeleton().index(n) for n in FOOT_JOINTS]
        joints = joints[:, list(foot_indices)]
    z = joints[..., 2]
    grounded = (z[:, :2] <= dist_thresh).any(axis=1) | (z[:, 2:] <= height_thresh).any(axis=1)
    return float(grounded.mean())


def _poses(x):
    """Accept Se3 or (N, 9) rows."""
    if isinstance(x, Se3):
        return x
    return Se3.from_row(np.asarray(x, dtype=float))


def e_v2v(pred, gt, tpl: ObjectTemplate):
    """Mean vertex-to-vertex distance in cm between posed templates."""
    pred, gt = _poses(pred), _poses(gt)
    _same_shape(pred.trans, gt.trans)
    d = np.linalg.norm(pred.apply(tpl.vertices) - gt.apply(tpl.vertices), axis=-1)
    return float(d.mean() * 100.0)


def e_c(pred, gt, tpl: ObjectTemplate):
    """Mean distance between posed template centroids in cm."""
    pred, gt = _poses(pred), _poses(gt)
    _same_shape(pred.trans, gt.trans)
    cp = pred.apply(tpl.vertices).mean(axis=-2)
    cg = gt.apply(tpl.vertices).mean(axis=-2)
    return float(np.linalg.norm(cp - cg, axis=-1).mean() * 100.0)


def _matrices(x):
    if isinstance(x, Se3):
        return x.matrix
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] == (3, 3):
        return x
    if x.shape[-1] == 9:
        x = x[..., :6]
    return rot6_to_matrix(x)


def rot_diff(pred, gt):
    """Mean geodesic angle in degrees; accepts Se3, rot6 rows, 9-rows or matrices."""
    pred, gt = _same_shape(_matrices(pred), _matrices(gt))
    return float(geodesic_angle(pred, gt).mean())


def q_diff(pred, gt):
    """Mean L1 distance between unit quaternions, minimized over the sign of q."""
    qp = matrix_to_quat(_same_shape(_matrices(pred), _matrices(gt))[0])
    qg = matrix_to_quat(_matrices(gt))
    d = np.minimum(np.abs(qp - qg).sum(-1), np.abs(qp + qg).sum(-1))
    return float(d.mean())


@dataclass
class MetricsReport:
    mpjpe: float
    mpjve: float
    fc: float
    e_v2v: float | None = None
    e_c: float | None = None
    rot_diff: float | None = None
    q_diff: float | None = None
    seed: int | None = None
    config_hash: str | None = None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def config_hash(config: dict):
    """sha256 of the canonical (sorted, compact) JSON form of a config."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def evaluate(pred, gt, skel: Skeleton | None = None, seed=None, config=None) -> MetricsReport:
    """All seven metrics for two InteractionSequences of equal length.

    FC is measured on the prediction. Object metrics are None when either
    sequence is motion-only.
    """
    skel = skel or load_skeleton()
    if len(pred) != len(gt):
        raise ShapeMismatch(f"sequence lengths differ: {len(pred)} vs {len(gt)}")
    jp, jg = fk(skel, pred.human), fk(skel, gt.human)
    rep = MetricsReport(
        mpjpe=mpjpe(jp, jg),
        mpjve=mpjve(jp, jg),
        fc=fc(jp, skel.foot_indices),
        seed=seed,
        config_hash=None if config is None else config_hash(config),
    )
    if not pred.motion_only and not gt.motion_only:
        tpl = gt.template
        rep.e_v2v = e_v2v(pred.obj, gt.obj, tpl)
        rep.e_c = e_c(pred.obj, gt.obj, tpl)
        rep.rot_diff = rot_diff(pred.obj, gt.obj)
        rep.q_diff = q_diff(pred.obj, gt.obj)
    return rep
