"""Simplified articulated human, rigid objects and binary contacts.

The human is a fixed-shape 22-joint skeleton (pelvis root + 21 rotating
joints) with z up, x forward and y to the left. The floor is the plane z = 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import FormatError
from .geom import IDENTITY_ROT6, Se3, rot6_to_matrix

N_JOINTS = 22
N_BODY_POINTS = 64
N_CONTACTS = N_BODY_POINTS + 4
HUMAN_WIDTH = 9 + 21 * 6
OBJECT_WIDTH = 9
SKELETON_FORMAT = "skeleton/1"

FOOT_JOINTS = ("left_ankle", "right_ankle", "left_foot", "right_foot")
EGO_JOINTS = ("head", "left_wrist", "right_wrist")

# name, parent, offset in the parent frame (meters); arms hang at rest
_JOINTS = [
    ("pelvis", -1, (0.0, 0.0, 0.0)),
    ("left_hip", 0, (0.0, 0.09, -0.08)),
    ("right_hip", 0, (0.0, -0.09, -0.08)),
    ("spine1", 0, (0.0, 0.0, 0.11)),
    ("left_knee", 1, (0.0, 0.01, -0.40)),
    ("right_knee", 2, (0.0, -0.01, -0.40)),
    ("spine2", 3, (0.0, 0.0, 0.13)),
    ("left_ankle", 4, (-0.02, 0.0, -0.40)),
    ("right_ankle", 5, (-0.02, 0.0, -0.40)),
    ("spine3", 6, (0.0, 0.0, 0.06)),
    ("left_foot", 7, (0.13, 0.01, -0.04)),
    ("right_foot", 8, (0.13, -0.01, -0.04)),
    ("neck", 9, (0.0, 0.0, 0.21)),
    ("left_collar", 9, (0.0, 0.07, 0.14)),
    ("right_collar", 9, (0.0, -0.07, 0.14)),
    ("head", 12, (0.02, 0.0, 0.10)),
    ("left_shoulder", 13, (0.0, 0.11, 0.02)),
    ("right_shoulder", 14, (0.0, -0.11, 0.02)),
    ("left_elbow", 16, (0.0, 0.02, -0.27)),
    ("right_elbow", 17, (0.0, -0.02, -0.27)),
    ("left_wrist", 18, (0.0, 0.0, -0.25)),
    ("right_wrist", 19, (0.0, 0.0, -0.25)),
]


@dataclass(frozen=True)
class Skeleton:
    """Kinematic tree plus the anchors of the contact points on the body.

    ``point_joint[i]``, ``point_frac[i]`` and ``point_offset[i]`` place body
    point i on the bone between ``point_joint[i]`` and its parent: the point
    sits at ``frac`` of the way from the joint towards the parent, displaced
    by ``offset`` expressed in the parent's frame.
    """

    names: tuple
    parent: np.ndarray
    offset: np.ndarray
    point_joint: np.ndarray
    point_frac: np.ndarray
    point_offset: np.ndarray

    def __post_init__(self):
        if len(self.names) != N_JOINTS:
            raise FormatError(f"skeleton needs {N_JOINTS} joints, got {len(self.names)}")
        if len(self.point_joint) != N_BODY_POINTS:
            raise FormatError(f"skeleton needs {N_BODY_POINTS} body points")
        for j, p in enumerate(self.parent):
            if j == 0 and p != -1 or j > 0 and not 0 <= p < j:
                raise FormatError("joints must be topologically ordered with the root first")
        missing = {"head", "left_wrist", "right_wrist", *FOOT_JOINTS} - set(self.names)
        if missing:
            raise FormatError(f"skeleton lacks joints {sorted(missing)}")

    def index(self, name):
        return self.names.index(name)

    @property
    def foot_indices(self):
        return [self.index(n) for n in FOOT_JOINTS]

    @property
    def ego_indices(self):
        return [self.index(n) for n in EGO_JOINTS]

    def to_dict(self):
        return {
            "format": SKELETON_FORMAT,
            "joints": [
                {"name": n, "parent": int(p), "offset": [float(x) for x in o]}
                for n, p, o in zip(self.names, self.parent, self.offset)
            ],
            "body_points": [
                {"joint": int(j), "frac": float(f), "offset": [float(x) for x in o]}
                for j, f, o in zip(self.point_joint, self.point_frac, self.point_offset)
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != SKELETON_FORMAT:
            raise FormatError(f"unsupported skeleton format {doc.get('format')!r}")
        joints = doc["joints"]
        points = doc["body_points"]
        return cls(
            names=tuple(j["name"] for j in joints),
            parent=np.array([j["parent"] for j in joints], dtype=int),
            offset=np.array([j["offset"] for j in joints], dtype=float),
            point_joint=np.array([p["joint"] for p in points], dtype=int),
            point_frac=np.array([p["frac"] for p in points], dtype=float),
            point_offset=np.array([p["offset"] for p in points], dtype=float),
        )


def build_default_skeleton() -> Skeleton:
    """Construct the shipped skeleton from scratch.

    Four anchors sit on the hands (wrist joint and a palm point per side);
    the remaining 60 are spread over the bones in proportion to bone length
    with small radial offsets perpendicular to each bone.
    """
    names = tuple(j[0] for j in _JOINTS)
    parent = np.array([j[1] for j in _JOINTS])
    offset = np.array([j[2] for j in _JOINTS], dtype=float)

    pj, pf, po = [], [], []
    for side in ("left_wrist", "right_wrist"):
        j = names.index(side)
        pj += [j, j]
        pf += [0.0, 0.0]
        po += [[0.0, 0.0, 0.0], [0.03, 0.0, -0.07]]

    n_spread = N_BODY_POINTS - len(pj)
    lengths = np.linalg.norm(offset[1:], axis=1)
    share = lengths / lengths.sum() * n_spread
    counts = np.floor(share).astype(int)
    for k in np.argsort(-(share - counts), kind="stable")[: n_spread - counts.sum()]:
        counts[k] += 1

    golden = np.pi * (3.0 - np.sqrt(5.0))
    k_global = 0
    for bone, count in enumerate(counts):
        j = bone + 1
        axis = offset[j] / np.linalg.norm(offset[j])
        helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = np.cross(axis, helper)
        u /= np.linalg.norm(u)
        v = np.cross(axis, u)
        radius = 0.04 if j <= 11 else 0.03
        for i in range(count):
            ang = golden * k_global
            k_global += 1
            pj.append(j)
            pf.append((i + 0.5) / count)
            po.append(list(radius * (np.cos(ang) * u + np.sin(ang) * v)))

    return Skeleton(
        names=names,
        parent=parent,
        offset=offset,
        point_joint=np.array(pj, dtype=int),
        point_frac=np.round(np.array(pf, dtype=float), 6),
        point_offset=np.round(np.array(po, dtype=float), 6),
    )


def load_skeleton(path=None) -> Skeleton:
    """Read a ``skeleton/1`` JSON document; defaults to the packaged one."""
    if path is None:
        text = resources.files("hoidiff.resources").joinpath("skeleton.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return Skeleton.from_dict(json.loads(text))


def write_skeleton(skel: Skeleton, path):
    with open(path, "w") as fh:
        json.dump(skel.to_dict(), fh, indent=1)
        fh.write("\n")


@dataclass(frozen=True)
class HumanFrame:
    """Root transform and 21 local joint rotations; may carry batch dims."""

    root: Se3
    joint_rot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "joint_rot", np.asarray(self.joint_rot, dtype=float))

    @classmethod
    def rest(cls, shape=()):
        shape = tuple(shape)
        rot = np.broadcast_to(IDENTITY_ROT6, shape + (21, 6)).copy()
        return cls(Se3.identity(shape), rot)

    @classmethod
    def from_row(cls, row):
        row = np.asarray(row, dtype=float)
        lead = row.shape[:-1]
        return cls(Se3.from_row(row[..., :9]), row[..., 9:].reshape(lead + (21, 6)))

    def to_row(self):
        lead = self.joint_rot.shape[:-2]
        return np.concatenate([self.root.to_row(), self.joint_rot.reshape(lead + (126,))], -1)

    def __getitem__(self, idx):
        return HumanFrame(self.root[idx], self.joint_rot[idx])


def fk_global(skel: Skeleton, frame: HumanFrame):
    """Global joint rotations (..., 22, 3, 3) and positions (..., 22, 3)."""
    r_root = frame.root.matrix
    r_local = rot6_to_matrix(frame.joint_rot)
    rots = [r_root]
    pos = [frame.root.trans]
    for j in range(1, N_JOINTS):
        p = skel.parent[j]
        rots.append(rots[p] @ r_local[..., j - 1, :, :])
        pos.append(pos[p] + rots[p] @ skel.offset[j])
    return np.stack(rots, axis=-3), np.stack(pos, axis=-2)


def fk(skel: Skeleton, frame: HumanFrame):
    """World joint positions (..., 22, 3)."""
    return fk_global(skel, frame)[1]


def body_points_from_fk(skel: Skeleton, rots, pos):
    j = skel.point_joint
    p = np.where(skel.parent[j] < 0, j, skel.parent[j])
    is_root = skel.parent[j] < 0
    frac = np.where(is_root, 1.0, skel.point_frac)
    local = (1.0 - frac)[:, None] * skel.offset[j] + skel.point_offset
    r_p = rots[..., p, :, :]
    return pos[..., p, :] + (r_p @ local[..., None])[..., 0]


def body_points(skel: Skeleton, frame: HumanFrame):
    """Contact anchor positions (..., 64, 3) in world coordinates."""
    rots, pos = fk_global(skel, frame)
    return body_points_from_fk(skel, rots, pos)


@dataclass(frozen=True)
class ObjectTemplate:
    class_id: int
    vertices: np.ndarray
    class_count: int = 33

    @property
    def one_hot(self):
        out = np.zeros(self.class_count)
        out[self.class_id] = 1.0
        return out


def make_template(class_id: int, n_vertices: int = 256, class_count: int = 33) -> ObjectTemplate:
    """Deterministic surface point cloud for an object class.

    Classes cycle through five shape families (box, cylinder, sphere, board,
    stick); the dimensions are drawn from an rng seeded by the class id.
    """
    if not 0 <= class_id < class_count:
        raise ValueError(f"class id {class_id} outside [0, {class_count})")
    if n_vertices < 4:
        raise ValueError("an object template needs at least 4 vertices")
    dims_rng = np.random.default_rng(1000 + class_id)
    rng = np.random.default_rng([class_id, n_vertices])
    family = class_id % 5
    if family == 0:
        half = dims_rng.uniform(0.12, 0.3, size=3)
        pts = _box_surface(rng, half, n_vertices)
    elif family == 1:
        radius, height = dims_rng.uniform(0.08, 0.2), dims_rng.uniform(0.2, 0.6)
        ang = rng.uniform(0, 2 * np.pi, n_vertices)
        pts = np.stack([radius * np.cos(ang), radius * np.sin(ang),
                        rng.uniform(-height / 2, height / 2, n_vertices)], -1)
    elif family == 2:
        radius = dims_rng.uniform(0.1, 0.25)
        d = rng.normal(size=(n_vertices, 3))
        pts = radius * d / np.linalg.norm(d, axis=1, keepdims=True)
    elif family == 3:
        half = np.array([dims_rng.uniform(0.3, 0.5), dims_rng.uniform(0.2, 0.4), 0.02])
        pts = _box_surface(rng, half, n_vertices)
    else:
        half = np.array([0.025, 0.025, dims_rng.uniform(0.3, 0.6)])
        pts = _box_surface(rng, half, n_vertices)
    pts = pts - pts.mean(axis=0)
    return ObjectTemplate(class_id, pts, class_count)


def _box_surface(rng, half, n):
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
    face_axis = rng.choice(3, size=n, p=areas / areas.sum())
    pts = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
    sign = rng.choice([-1.0, 1.0], size=n)
    pts[np.arange(n), face_axis] = sign * half[face_axis]
    return pts


@dataclass(frozen=True)
class ObjectFrame:
    pose: Se3


def object_vertices(tpl: ObjectTemplate, frame: ObjectFrame):
    """Template vertices posed by the object transform, (..., V, 3)."""
    return frame.pose.apply(tpl.vertices)


@dataclass(frozen=True)
class ContactConfig:
    tau_c: float = 0.05
    tau_f: float = 0.05

    def __post_init__(self):
        if self.tau_c <= 0 or self.tau_f <= 0:
            raise ValueError("contact thresholds must be positive")


def min_distances(points, verts):
    """Distance from each point to its nearest vertex, (..., P)."""
    diff = points[..., :, None, :] - verts[..., None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1)).min(axis=-1)


def compute_contacts(skel, hf: HumanFrame, tpl=None, of=None, cfg=ContactConfig()):
    """Binary contact vector (..., 68): 64 body-object labels then 4 foot-floor labels.

    Without an object the body labels are all zero.
    """
    rots, pos = fk_global(skel, hf)
    lead = pos.shape[:-2]
    out = np.zeros(lead + (N_CONTACTS,), dtype=np.uint8)
    if tpl is not None and of is not None:
        pts = body_points_from_fk(skel, rots, pos)
        verts = object_vertices(tpl, of)
        out[..., :N_BODY_POINTS] = min_distances(pts, verts) <= cfg.tau_c
    out[..., N_BODY_POINTS:] = pos[..., skel.foot_indices, 2] <= cfg.tau_f
    return out


def split_contacts(c):
    c = np.asarray(c)
    return c[..., :N_BODY_POINTS], c[..., N_BODY_POINTS:]

