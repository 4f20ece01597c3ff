"""Interaction sequences, the ``seq/1`` JSON-Lines format and training windows.

A ``seq/1`` file starts with a header line::

    {"format": "seq/1", "fps": 30.0, "skeleton": "default", "object_class": 3,
     "V": 256, "class_count": 33, "frames": 120, "meta": {...}}

followed by one JSON object per frame with keys ``root`` (9 floats),
``pose`` (126 floats), ``object`` (9 floats or null) and ``contact``
(68 ints or null). Floats are written with ``repr`` precision, so a
float64 round trip is exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .body import (N_CONTACTS, HumanFrame, ObjectFrame, ObjectTemplate, Skeleton,
                   compute_contacts, make_template)
from .canon import Anchor, canonicalize, ego_condition, head_pose, transform_ego
from .errors import FormatError, SequenceTooShort
from .geom import Se3, se3_inverse

SEQ_FORMAT = "seq/1"


@dataclass
class InteractionSequence:
    """World-frame ground truth or prediction for N frames.

    ``obj``, ``contacts`` and ``template`` are either all set or all None
    (motion-only).
    """

    human: HumanFrame
    obj: Se3 | None = None
    contacts: np.ndarray | None = None
    template: ObjectTemplate | None = None
    fps: float = 30.0
    skeleton: str = "default"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.human.joint_rot.shape[0]
        if self.human.joint_rot.ndim != 3 or n < 2:
            raise SequenceTooShort("a sequence needs at least 2 frames")
        present = [self.obj is not None, self.contacts is not None, self.template is not None]
        if any(present) and not all(present):
            raise ValueError("object poses, contacts and template must be given together")
        if self.obj is not None:
            if self.obj.rot.shape != (n, 6):
                raise ValueError("object track length differs from the human track")
            self.contacts = np.asarray(self.contacts, dtype=np.uint8)
            if self.contacts.shape != (n, N_CONTACTS):
                raise ValueError(f"contacts must be ({n}, {N_CONTACTS})")

    def __len__(self):
        return self.human.joint_rot.shape[0]

    @property
    def motion_only(self):
        return self.obj is None

    def slice(self, start, stop):
        sl = slice(start, stop)
        if self.motion_only:
            return InteractionSequence(self.human[sl], fps=self.fps, skeleton=self.skeleton, meta=dict(self.meta))
        return InteractionSequence(self.human[sl], self.obj[sl], self.contacts[sl], self.template,
                                   self.fps, self.skeleton, dict(self.meta))


def write_sequence(seq: InteractionSequence, path):
    """Write ``seq/1`` JSON Lines. Raises OSError on I/O failure."""
    tpl = seq.template
    header = {
        "format": SEQ_FORMAT,
        "fps": float(seq.fps),
        "skeleton": seq.skeleton,
        "object_class": None if tpl is None else int(tpl.class_id),
        "V": None if tpl is None else int(len(tpl.vertices)),
        "class_count": 33 if tpl is None else int(tpl.class_count),
        "frames": len(seq),
        "meta": seq.meta,
    }
    root = seq.human.root.to_row()
    pose = seq.human.joint_rot.reshape(len(seq), -1)
    obj = None if seq.motion_only else seq.obj.to_row()
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for i in range(len(seq)):
            rec = {
                "root": root[i].tolist(),
                "pose": pose[i].tolist(),
                "object": None if obj is None else obj[i].tolist(),
                "contact": None if obj is None else seq.contacts[i].astype(int).tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def _field(rec, key, width, lineno):
    val = rec.get(key, "missing")
    if val == "missing":
        raise FormatError(f"line {lineno}: missing field {key!r}")
    if val is None:
        return None
    arr = np.asarray(val, dtype=float)
    if arr.shape != (width,):
        raise FormatError(f"line {lineno}: field {key!r} must hold {width} numbers")
    return arr


def read_sequence(path) -> InteractionSequence:
    """Read a ``seq/1`` file. Raises OSError for I/O and FormatError for bad content."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty sequence file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad header: {exc}") from None
    if not isinstance(header, dict) or "format" not in header:
        raise FormatError("header has no format field")
    if header["format"] != SEQ_FORMAT:
        raise FormatError(f"unsupported format version {header['format']!r}, expected {SEQ_FORMAT!r}")
    for key in ("fps", "object_class", "V", "frames"):
        if key not in header:
            raise FormatError(f"header is missing {key!r}")
    n = header["frames"]
    if len(lines) - 1 != n:
        raise FormatError(f"expected {n} frames, found {len(lines) - 1} (truncated file?)")
    roots, poses, objs, contacts = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        roots.append(_field(rec, "root", 9, lineno))
        poses.append(_field(rec, "pose", 126, lineno))
        objs.append(_field(rec, "object", 9, lineno))
        contacts.append(_field(rec, "contact", N_CONTACTS, lineno))
    if any(r is None for r in roots) or any(p is None for p in poses):
        raise FormatError("human root and pose are required on every frame")
    has_obj = [o is not None for o in objs]
    has_c = [c is not None for c in contacts]
    if len(set(has_obj + has_c)) > 1:
        raise FormatError("object and contact must be present on every frame or on none")
    human = HumanFrame(Se3.from_row(np.stack(roots)), np.stack(poses).reshape(n, 21, 6))
    meta = header.get("meta") or {}
    if not has_obj[0]:
        return InteractionSequence(human, fps=header["fps"], skeleton=header.get("skeleton", "default"),
                                   meta=meta)
    if header["object_class"] is None or header["V"] is None:
        raise FormatError("object frames present but header names no object class")
    tpl = make_template(int(header["object_class"]), int(header["V"]), int(header.get("class_count", 33)))
    c = np.stack(contacts)
    if not np.isin(c, (0, 1)).all():
        raise FormatError("contact labels must be 0 or 1")
    return InteractionSequence(human, Se3.from_row(np.stack(objs)), c.astype(np.uint8), tpl,
                               header["fps"], header.get("skeleton", "default"), meta)


def world_ego(skel: Skeleton, seq: InteractionSequence):
    """Ego conditioning (N, 54) of a whole sequence in world coordinates."""
    return ego_condition(skel, seq.human, Anchor.identity(), dt=1.0 / seq.fps)


def ego_head_pose(ego_row) -> Se3:
    """Head pose encoded in an ego row (rotation and position of the first point)."""
    ego_row = np.asarray(ego_row, dtype=float)
    return Se3(ego_row[..., 0:6], ego_row[..., 36:39])


@dataclass
class Batch:
    """Canonicalized training windows.

    Attributes:
        h, o, c: arrays (B, W, 135), (B, W, 9), (B, W, 68) clean targets.
        ego: array (B, W, 54) conditioning in each window's frame.
        descriptor: array (B, C + 64) object descriptors.
        verts: array (B, V, 3) template vertices (zeros for motion-only items).
        foot_gate: array (B, W, 4) foot-floor labels.
        motion_only: bool array (B,).
        anchors: list of the B anchors.
    """

    h: np.ndarray
    o: np.ndarray
    c: np.ndarray
    ego: np.ndarray
    descriptor: np.ndarray
    verts: np.ndarray
    foot_gate: np.ndarray
    motion_only: np.ndarray
    anchors: list


class _Prepared:
    """Per-sequence quantities reused by every window."""

    def __init__(self, skel, seq: InteractionSequence, descriptor_fn):
        self.seq = seq
        self.ego = world_ego(skel, seq)
        self.human = seq.human.to_row()
        self.obj = None if seq.motion_only else seq.obj.to_row()
        if seq.motion_only:
            self.contacts = compute_contacts(skel, seq.human).astype(float)
        else:
            self.contacts = seq.contacts.astype(float)
        self.descriptor = descriptor_fn(seq.template)


def window_batches(seqs, W, batch_size, rng, skel: Skeleton, canonical=True, class_count=33,
                   n_vertices=None):
    """Endless stream of :class:`Batch` objects.

    Each item picks a sequence uniformly, then a uniform window start, and
    expresses the window in the gravity-aligned frame of its first head
    pose (or the world frame when ``canonical`` is False).
    """
    from .network import object_descriptor

    seqs = list(seqs)
    for s in seqs:
        if len(s) < W:
            raise SequenceTooShort(f"sequence of {len(s)} frames is shorter than the window {W}")
    prepared = [_Prepared(skel, s, lambda t: object_descriptor(t, class_count)) for s in seqs]
    if n_vertices is None:
        sizes = [len(s.template.vertices) for s in seqs if not s.motion_only]
        n_vertices = max(sizes) if sizes else 1
    while True:
        yield sample_batch(prepared, W, batch_size, rng, canonical, n_vertices)


def sample_batch(prepared, W, batch_size, rng, canonical, n_vertices):
    items = []
    for _ in range(batch_size):
        p = prepared[int(rng.integers(len(prepared)))]
        start = int(rng.integers(len(p.seq) - W + 1))
        items.append(_window(p, start, W, canonical, n_vertices))
    cols = list(zip(*items))
    return Batch(*(np.stack(col) for col in cols[:-1]), anchors=list(cols[-1]))


def _window(p: _Prepared, start, W, canonical, n_vertices):
    sl = slice(start, start + W)
    if canonical:
        anchor = Anchor.from_head(ego_head_pose(p.ego[start]))
    else:
        anchor = Anchor.identity()
    inv = se3_inverse(anchor.transform)
    h = p.human[sl].copy()
    h[:, :9] = canonicalize(anchor, Se3.from_row(h[:, :9])).to_row()
    ego = transform_ego(inv, p.ego[sl])
    verts = np.zeros((n_vertices, 3))
    if p.obj is None:
        o = np.zeros((W, 9))
    else:
        o = canonicalize(anchor, Se3.from_row(p.obj[sl])).to_row()
        v = p.seq.template.vertices
        verts[:len(v)] = v
        verts[len(v):] = v[0]
    c = p.contacts[sl]
    return h, o, c, ego, p.descriptor, verts, c[:, -4:], p.obj is None, anchor


def canonical_rows(seq: InteractionSequence, anchor: Anchor, frames=None):
    """Human, object and contact rows of selected frames in an anchor's frame.

    Object rows are identity and contacts zero for motion-only sequences.
    """
    idx = np.arange(len(seq)) if frames is None else np.asarray(frames)
    human = seq.human[idx]
    h = human.to_row()
    h[..., :9] = canonicalize(anchor, human.root).to_row()
    if seq.motion_only:
        o = np.zeros(idx.shape + (9,))
        o[..., 0] = o[..., 4] = 1.0
        c = np.zeros(idx.shape + (N_CONTACTS,))
    else:
        o = canonicalize(anchor, seq.obj[idx]).to_row()
        c = seq.contacts[idx].astype(float)
    return h, o, c


def object_frames(seq: InteractionSequence):
    return None if seq.motion_only else ObjectFrame(seq.obj)
