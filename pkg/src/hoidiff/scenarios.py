"""Procedural human-object interaction sequences with exact ground truth.

Four scripted scenarios:

* ``idle-walk``: stand, walk, pause, walk; no object.
* ``carry``: walk up to an object, reach for it with the right hand, carry
  it rigidly attached to the wrist, release it, stand.
* ``push``: walk up to an object, raise both hands to it, walk while the
  object slides ahead of the body, release.
* ``place``: start already holding an object, walk, stop, lower the arm and
  release.

The root heading follows a smoothly varying turning rate, legs and arms
follow a distance-driven gait cycle, and the body is lowered every frame so
that its lowest foot joint rests on the floor. Contacts are produced by
:func:`hoidiff.body.compute_contacts`, so they agree with the geometry by
construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .body import (ContactConfig, HumanFrame, ObjectFrame, Skeleton, compute_contacts, fk_global,
                   load_skeleton, make_template, min_distances)
from .dataset import InteractionSequence
from .errors import InvalidConfig
from .geom import Se3, axis_rotation, matrix_to_rot6, rot6_to_matrix, se3_compose, se3_inverse

SCENARIOS = ("carry", "push", "place", "idle-walk")
GRASP_GAP = 0.01

# phase boundaries as fractions of the duration
_PHASES = {
    "idle-walk": dict(walk=[(0.15, 0.6), (0.7, 0.95)]),
    "carry": dict(walk=[(0.0, 0.3), (0.45, 0.8)], reach=(0.3, 0.42), release=(0.8, 0.9)),
    "push": dict(walk=[(0.0, 0.25), (0.37, 0.85)], reach=(0.25, 0.35), release=(0.85, 0.95)),
    "place": dict(walk=[(0.0, 0.5)], reach=None, release=(0.6, 0.75)),
}


@dataclass
class ScenarioConfig:
    scenario: str = "carry"
    frames: int = 120
    seed: int = 0
    object_class: int | None = None
    fps: float = 30.0
    speed: tuple = (0.7, 1.2)
    turn_rate: float = 0.6
    n_vertices: int = 256
    class_count: int = 33
    jitter: float = 0.0
    min_frames: int = 60
    contact: ContactConfig = field(default_factory=ContactConfig)

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise InvalidConfig(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.frames < max(2, self.min_frames):
            raise InvalidConfig(f"duration {self.frames} is shorter than the window {self.min_frames}")
        if self.object_class is not None and not 0 <= self.object_class < self.class_count:
            raise InvalidConfig(f"object class {self.object_class} out of range")
        if self.fps <= 0 or self.jitter < 0:
            raise InvalidConfig("fps must be positive and jitter nonnegative")


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x)


def _window(t, lo, hi, ramp):
    """Smooth indicator of [lo, hi] with ramps of the given width."""
    return _smoothstep((t - lo) / ramp) * (1.0 - _smoothstep((t - hi) / ramp + 1.0))


def _walk_profile(n, phases, ramp_frames):
    t = np.arange(n, dtype=float)
    out = np.zeros(n)
    for lo, hi in phases:
        a, b = lo * (n - 1), hi * (n - 1)
        out = np.maximum(out, _window(t, a, b, ramp_frames))
    return out


def _ramp_between(n, lo, hi):
    t = np.arange(n, dtype=float)
    return _smoothstep((t - lo) / max(hi - lo, 1.0))


def _animate(skel: Skeleton, rng, cfg: ScenarioConfig):
    """Root trajectory, local joint rotations and engagement signals."""
    n = cfg.frames
    dt = 1.0 / cfg.fps
    ph = _PHASES[cfg.scenario]
    walk = _walk_profile(n, ph["walk"], ramp_frames=0.4 * cfg.fps)
    v_walk = rng.uniform(*cfg.speed)
    speed = v_walk * walk

    # heading: random smooth turning, scaled down while standing
    t = np.arange(n) * dt
    f = rng.uniform(0.2, 0.6, size=2)
    phi = rng.uniform(0, 2 * np.pi, size=2)
    amp = cfg.turn_rate * rng.uniform(0.3, 1.0, size=2)
    omega = (amp[0] * np.sin(2 * np.pi * f[0] * t + phi[0]) + amp[1] * np.sin(2 * np.pi * f[1] * t + phi[1]))
    omega *= 0.3 + 0.7 * walk
    yaw = rng.uniform(-np.pi, np.pi) + np.concatenate([[0.0], np.cumsum(omega[:-1] * dt)])
    step = speed[:-1, None] * dt * np.stack([np.cos(yaw[:-1]), np.sin(yaw[:-1])], -1)
    xy = rng.uniform(-1.0, 1.0, size=2) + np.concatenate([np.zeros((1, 2)), np.cumsum(step, axis=0)])

    dist = np.concatenate([[0.0], np.cumsum(speed[:-1] * dt)])
    gait = 2 * np.pi * dist / 1.2 + rng.uniform(0, 2 * np.pi)
    m = walk

    # engagement of the arms: 0 hanging, 1 reaching/holding
    reach = np.zeros(n)
    if cfg.scenario in ("carry", "push"):
        lo, hi = ph["reach"]
        reach = _ramp_between(n, lo * (n - 1), hi * (n - 1))
    elif cfg.scenario == "place":
        reach = np.ones(n)
    release_frame = None
    if "release" in ph:
        lo, hi = ph["release"]
        release_frame = int(round(lo * (n - 1)))
        lower = _ramp_between(n, lo * (n - 1), hi * (n - 1))
        reach = reach * (1.0 - lower)
    grasp_frame = 0 if cfg.scenario == "place" else int(round(ph["reach"][1] * (n - 1))) \
        if ph.get("reach") else None

    look_f, look_phi = rng.uniform(0.1, 0.4), rng.uniform(0, 2 * np.pi)
    head_yaw = 0.35 * np.sin(2 * np.pi * look_f * t + look_phi)
    head_pitch = 0.1 + 0.25 * reach

    idx = skel.index
    rots = np.broadcast_to(np.eye(3), (n, 22, 3, 3)).copy()

    def set_rot(name, mat):
        rots[:, idx(name)] = mat

    swing = np.sin(gait)
    set_rot("left_hip", axis_rotation("y", -0.45 * m * swing))
    set_rot("right_hip", axis_rotation("y", 0.45 * m * swing))
    set_rot("left_knee", axis_rotation("y", 0.6 * m * np.maximum(0, np.sin(gait + 1.2))))
    set_rot("right_knee", axis_rotation("y", 0.6 * m * np.maximum(0, np.sin(gait + 1.2 + np.pi))))
    set_rot("left_ankle", axis_rotation("y", -0.15 * m * np.sin(gait + 0.5)))
    set_rot("right_ankle", axis_rotation("y", 0.15 * m * np.sin(gait + 0.5)))
    set_rot("spine1", axis_rotation("z", 0.08 * m * swing))
    set_rot("spine3", axis_rotation("x", 0.05 * np.sin(0.5 * gait)))
    set_rot("neck", axis_rotation("z", 0.5 * head_yaw))
    set_rot("head", axis_rotation("z", 0.5 * head_yaw) @ axis_rotation("y", head_pitch))

    both = cfg.scenario == "push"
    r_eng = reach
    l_eng = reach if both else np.zeros(n)
    arm_swing = 0.35 * m * swing
    for side, eng, sgn in (("left", l_eng, 1.0), ("right", r_eng, -1.0)):
        free = (1.0 - eng)
        shoulder = axis_rotation("y", -(0.8 * eng) + sgn * arm_swing * free) @ \
            axis_rotation("x", -sgn * 0.08 * free)
        set_rot(f"{side}_shoulder", shoulder)
        set_rot(f"{side}_elbow", axis_rotation("y", -(0.5 * eng + 0.15 * free)))
        set_rot(f"{side}_wrist", axis_rotation("x", sgn * 0.3 * eng))

    joint_rot = matrix_to_rot6(rots[:, 1:])
    root_rot = matrix_to_rot6(axis_rotation("z", yaw))
    if cfg.jitter > 0:
        joint_rot = matrix_to_rot6(rot6_to_matrix(joint_rot + rng.normal(0, cfg.jitter, joint_rot.shape)))

    trans = np.concatenate([xy, np.zeros((n, 1))], axis=-1)
    human = HumanFrame(Se3(root_rot, trans), joint_rot)
    _, pos = fk_global(skel, human)
    trans[:, 2] = -pos[:, skel.foot_indices, 2].min(axis=1)
    human = HumanFrame(Se3(root_rot, trans), joint_rot)
    return human, yaw, grasp_frame, release_frame


def _place_near(point, tpl, rot, direction, gap):
    """Object pose with the given rotation whose surface lies ``gap`` from ``point``.

    Among the vertices on the side facing ``point`` (within 2 cm of the
    extreme along ``-direction``) the one closest to the approach line is
    put exactly ``gap`` ahead of ``point``.
    """
    verts = tpl.vertices @ rot.T
    along = verts @ direction
    perp = np.linalg.norm(verts - along[:, None] * direction, axis=1)
    cand = np.nonzero(along <= along.min() + 0.02)[0]
    v = verts[cand[np.argmin(perp[cand])]]
    return Se3.from_matrix(rot, point + gap * direction - v)


def gen_scenario(cfg: ScenarioConfig, skel: Skeleton | None = None) -> InteractionSequence:
    """Generate one ground-truth sequence; identical output for identical configs."""
    cfg.validate()
    skel = skel or load_skeleton()
    rng = np.random.default_rng(cfg.seed)
    human, yaw, grasp, release = _animate(skel, rng, cfg)
    n = cfg.frames
    meta = {"scenario": cfg.scenario, "seed": cfg.seed}
    if cfg.scenario == "idle-walk":
        return InteractionSequence(human=human, fps=cfg.fps, meta=meta)

    cls = cfg.object_class if cfg.object_class is not None else int(rng.integers(cfg.class_count))
    tpl = make_template(cls, cfg.n_vertices, cfg.class_count)
    rots, pos = fk_global(skel, human)
    release = n if release is None else release

    w = skel.index("right_wrist")
    fwd = np.array([np.cos(yaw[grasp]), np.sin(yaw[grasp]), 0.0])
    start = _place_near(pos[grasp, w], tpl, axis_rotation("z", yaw[grasp]), fwd, GRASP_GAP)
    if cfg.scenario == "push":
        # keeps the body's heading, follows the right hand
        carrier = Se3.from_matrix(axis_rotation("z", yaw), pos[:, w])
    else:
        carrier = Se3.from_matrix(rots[:, w], pos[:, w])
    rel = se3_compose(se3_inverse(carrier[grasp]), start)

    held = se3_compose(carrier, Se3(np.broadcast_to(rel.rot, (n, 6)), np.broadcast_to(rel.trans, (n, 3))))
    obj_rot = held.rot.copy()
    obj_trans = held.trans.copy()
    obj_rot[:grasp] = held.rot[grasp]
    obj_trans[:grasp] = held.trans[grasp]
    obj_rot[release:] = held.rot[release]
    obj_trans[release:] = held.trans[release]
    obj = Se3(obj_rot, obj_trans)

    contacts = compute_contacts(skel, human, tpl, ObjectFrame(obj), cfg.contact)
    meta.update(grasp=int(grasp), release=int(release))
    return InteractionSequence(human=human, obj=obj, contacts=contacts, template=tpl,
                               fps=cfg.fps, meta=meta)

