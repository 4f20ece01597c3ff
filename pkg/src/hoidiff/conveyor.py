"""Streaming inference over a ring of W frames with ramped timestamps.

The head of the ring holds ``K`` clean context frames, the rest ramps from
nearly clean to pure noise at the tail. Every tick runs the denoiser once,
moves every noisy slot one rung down the ramp, emits the frame that just
became clean, drops the head slot and opens a fresh noise slot at the tail.
After each tick the window frame is re-anchored on the gravity-aligned head
pose of the new head slot, so the network always sees windows expressed the
way training windows are.

Slots store modality rows in the current window frame. Ego rows are kept in
world coordinates and re-expressed on demand. Observed values are kept in
world coordinates as well and substituted verbatim on emission.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .body import HUMAN_WIDTH, N_CONTACTS, OBJECT_WIDTH, HumanFrame, ObjectTemplate, Skeleton
from .canon import Anchor, canonicalize, decanonicalize, transform_ego, transform_rows
from .dataset import InteractionSequence, canonical_rows, ego_head_pose
from .diffusion import GuidanceConfig, guided_correction, reverse_jump
from .errors import BufferNotReady, InvalidContextCount, SequenceTooShort, WidthMismatch
from .geom import DEGENERACY_EPS, IDENTITY_ROT6, Se3, matrix_to_rot6, rot6_to_matrix, se3_compose, se3_inverse
from .schedule import NoiseSchedule, conveyor_ramp

WIDTHS = (HUMAN_WIDTH, OBJECT_WIDTH, N_CONTACTS)
KEYS = ("h", "o", "c")


@dataclass
class Window:
    """Everything a denoiser sees on one tick.

    ``frame_ids`` is -1 for filler slots; ``anchor`` is the current window
    frame. Denoisers must only use the first six fields; the last two let
    test oracles look up ground truth.
    """

    h: np.ndarray
    o: np.ndarray
    c: np.ndarray
    ego: np.ndarray
    grid: np.ndarray
    descriptor: np.ndarray
    frame_ids: np.ndarray
    anchor: Anchor


@dataclass
class EmittedFrame:
    """One finished world-frame output.

    ``chain`` lists the (t_h, t_o, t_c) timestamps the slot held after each
    tick it spent in the ring, ending at (0, 0, 0).
    """

    frame_id: int
    human: HumanFrame
    obj: Se3 | None
    contact: np.ndarray
    chain: list = field(default_factory=list)


class OracleDenoiser:
    """Returns ground truth in the current window frame; for testing the pipeline."""

    def __init__(self, seq: InteractionSequence):
        self.seq = seq

    def predict(self, window: Window):
        w = len(window.frame_ids)
        h = np.zeros((w, HUMAN_WIDTH))
        h[:, 0:6] = IDENTITY_ROT6
        h[:, 9:] = np.tile(IDENTITY_ROT6, 21)
        o = np.zeros((w, OBJECT_WIDTH))
        o[:, 0:6] = IDENTITY_ROT6
        c = np.zeros((w, N_CONTACTS))
        real = window.frame_ids >= 0
        if real.any():
            h[real], o[real], c[real] = canonical_rows(self.seq, window.anchor, window.frame_ids[real])
        return h, o, c


def _valid_rot6(r):
    """Project predicted 6D rotations onto valid ones; degenerate rows become identity."""
    r = np.array(r, dtype=float)
    a1, a2 = r[..., 0:3], r[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1)
    b1 = a1 / np.maximum(n1, DEGENERACY_EPS)[..., None]
    u2 = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    bad = (n1 <= DEGENERACY_EPS) | (np.linalg.norm(u2, axis=-1) <= DEGENERACY_EPS * np.linalg.norm(a2, axis=-1)) \
        | (np.linalg.norm(a2, axis=-1) <= DEGENERACY_EPS) | ~np.isfinite(r).all(axis=-1)
    r[bad] = IDENTITY_ROT6
    return matrix_to_rot6(rot6_to_matrix(r))


def _reexpress(g: Se3, rows, scale):
    """Apply a rigid change of frame to noisy ``[rot6, trans]`` rows.

    A row at timestamp t is ``a z0 + b eps`` with ``a = sqrt(alpha_bar_t)``;
    moving ``z0`` rigidly rotates every 3-vector and shifts the clean
    translation, so the noisy translation moves by ``a * g.trans``. The noise
    stays isotropic. Clean rows (a = 1) get the exact rigid transform.
    """
    out = transform_rows(Se3(g.rot, np.zeros(3)), rows)
    out[..., 6:9] += scale[..., None] * g.trans
    return out


class Conveyor:
    """Single-owner streaming state machine; see :func:`conveyor_init`."""

    def __init__(self, anchor: Anchor, schedule: NoiseSchedule, skel: Skeleton, W, K, rng,
                 template: ObjectTemplate | None = None, descriptor=None,
                 guidance: GuidanceConfig | None = None, canonical=True):
        if not 0 <= K < W:
            raise InvalidContextCount(f"context count {K} must be in [0, {W})")
        self.schedule = schedule
        self.skel = skel
        self.W, self.K, self.T = W, K, schedule.T
        self.rng = rng
        self.template = template
        self.verts = None if template is None else template.vertices
        self.descriptor = np.zeros(0) if descriptor is None else np.asarray(descriptor, dtype=float)
        self.guidance = guidance or GuidanceConfig(enabled=False)
        self.canonical = canonical
        self.anchor = anchor if canonical else Anchor.identity()
        self.ramp = conveyor_ramp(W, self.T, K)

        self.rows = [rng.standard_normal((W, d)) for d in WIDTHS]
        self.t = np.tile(self.ramp[:, None], (1, 3))
        self.ego = np.zeros((W, 54))
        self.frame_ids = np.full(W, -1, dtype=np.int64)
        self.observed = np.zeros((W, 3), dtype=bool)
        self.obs_values = [dict() for _ in range(W)]
        # context slots that were never denoised hold plain noise
        self.noise_only = np.arange(W) < K
        self.chains = [[] for _ in range(W)]
        self.emitted_count = 0
        self.ticks = 0
        self._tail_open = True
        self._have_ego = False
        self._next_id = 0

    @property
    def motion_only(self):
        return self.template is None

    def timestamps(self):
        """Current (W, 3) timestamps, head first."""
        return self.t.copy()

    def push(self, ego_row, observed=None, frame_id=None):
        """Fill the open tail slot.

        Args:
            ego_row: (54,) conditioning of the new frame in world coordinates.
            observed: optional dict with any of ``h`` (135-row or HumanFrame),
                ``o`` (9-row or Se3) and ``c`` (68 labels), all world frame.
            frame_id: id reported on emission; defaults to a running count.
        """
        if not self._tail_open:
            raise BufferNotReady("tail slot already filled; tick before pushing again")
        ego_row = np.asarray(ego_row, dtype=float)
        if ego_row.shape != (54,):
            raise WidthMismatch("ego row must have 54 entries")
        tail = self.W - 1
        if not self._have_ego:
            self.ego[:] = ego_row
            self._have_ego = True
        self.ego[tail] = ego_row
        self.frame_ids[tail] = self._next_id if frame_id is None else frame_id
        self._next_id = int(self.frame_ids[tail]) + 1
        for key, value in (observed or {}).items():
            self._observe(tail, key, value)
        self._tail_open = False

    def _observe(self, slot, key, value):
        m = KEYS.index(key)
        if m > 0 and self.motion_only:
            raise ValueError("object or contact observations need an object template")
        if isinstance(value, HumanFrame):
            value = value.to_row()
        elif isinstance(value, Se3):
            value = value.to_row()
        value = np.array(value, dtype=float)
        if value.shape != (WIDTHS[m],):
            raise WidthMismatch(f"observed {key} must have {WIDTHS[m]} entries")
        self.obs_values[slot][key] = value
        if key == "c":
            canon = value
        else:
            canon = value.copy()
            canon[:9] = canonicalize(self.anchor, Se3.from_row(value[:9])).to_row()
        self.rows[m][slot] = canon
        self.t[slot, m] = 0
        self.observed[slot, m] = True

    def window(self) -> Window:
        grid = self.t.T.copy()
        grid[:, self.noise_only] = self.T
        if self.motion_only:
            grid[1:] = self.T
        ego = transform_ego(se3_inverse(self.anchor.transform), self.ego)
        return Window(self.rows[0].copy(), self.rows[1].copy(), self.rows[2].copy(), ego, grid,
                      self.descriptor, self.frame_ids.copy(), self.anchor)

    def tick(self, model):
        """Advance one step; returns an :class:`EmittedFrame` or None."""
        if not self._have_ego:
            raise BufferNotReady("push at least one ego frame before ticking")
        W, K = self.W, self.K
        h0, o0, c0 = (np.asarray(a, dtype=float) for a in model.predict(self.window()))
        if self.guidance.enabled:
            h0, o0g = guided_correction(
                h0, None if self.motion_only else o0, c0, self.skel, self.anchor, self.guidance,
                verts=self.verts, h_active=self.t[:, 0] > 0, o_active=self.t[:, 1] > 0)
            if o0g is not None:
                o0 = o0g
        pred = (h0, o0, c0)

        prev = np.concatenate([[0], self.ramp[:-1]])
        new_t = np.where(self.t > 0, prev[:, None], 0)
        for m in range(3):
            eps = self.rng.standard_normal((W, WIDTHS[m]))
            moving = self.t[:, m] > 0
            jumped = reverse_jump(pred[m], new_t[:, m], eps, self.schedule)
            self.rows[m][moving] = jumped[moving]
            if m > 0 and self.motion_only:
                self.rows[m] = eps
        self.t = new_t
        for i in range(W):
            self.chains[i].append(tuple(int(x) for x in new_t[i]))

        emitted = None
        if self.frame_ids[K] >= 0:
            emitted = self._decode(K)
            self.emitted_count += 1
        self._shift()
        self._reanchor()
        self.ticks += 1
        self._tail_open = True
        return emitted

    def _decode(self, slot):
        obs = self.obs_values[slot]
        if "h" in obs:
            human = HumanFrame.from_row(obs["h"])
        else:
            row = self.rows[0][slot]
            root = decanonicalize(self.anchor, Se3(_valid_rot6(row[:6]), row[6:9]))
            joints = _valid_rot6(row[9:].reshape(21, 6))
            human = HumanFrame(root, joints)
        obj = None
        if not self.motion_only:
            row = self.rows[1][slot]
            obj = Se3.from_row(obs["o"]) if "o" in obs else \
                decanonicalize(self.anchor, Se3(_valid_rot6(row[:6]), row[6:9]))
        if "c" in obs:
            contact = obs["c"].astype(np.uint8)
        else:
            contact = (self.rows[2][slot] >= 0.5).astype(np.uint8)
        return EmittedFrame(int(self.frame_ids[slot]), human, obj, contact, list(self.chains[slot]))

    def _shift(self):
        W = self.W
        for m in range(3):
            self.rows[m] = np.concatenate([self.rows[m][1:], self.rng.standard_normal((1, WIDTHS[m]))])
        self.t = np.concatenate([self.t[1:], np.full((1, 3), self.ramp[-1])])
        self.ego = np.concatenate([self.ego[1:], self.ego[-1:]])
        self.frame_ids = np.concatenate([self.frame_ids[1:], [-1]])
        self.observed = np.concatenate([self.observed[1:], np.zeros((1, 3), dtype=bool)])
        self.obs_values = self.obs_values[1:] + [dict()]
        self.noise_only = np.concatenate([self.noise_only[1:], [False]])
        self.chains = self.chains[1:] + [[]]
        assert len(self.chains) == W

    def _reanchor(self):
        if not self.canonical:
            return
        new = Anchor.from_head(ego_head_pose(self.ego[0]))
        g = se3_compose(se3_inverse(new.transform), self.anchor.transform)
        sab = self.schedule.sqrt_ab
        self.rows[0][:, :9] = _reexpress(g, self.rows[0][:, :9], sab[self.t[:, 0]])
        if not self.motion_only:
            self.rows[1] = _reexpress(g, self.rows[1], sab[self.t[:, 1]])
        self.anchor = new


def conveyor_init(anchor_head_pose: Se3, schedule: NoiseSchedule, K, rng, skel: Skeleton, W=60,
                  **kwargs) -> Conveyor:
    """Fresh conveyor whose slots are pure noise on the ramp ``conveyor_ramp(W, T, K)``.

    Keyword arguments are forwarded to :class:`Conveyor` (template,
    descriptor, guidance, canonical).
    """
    return Conveyor(Anchor.from_head(anchor_head_pose), schedule, skel, W, K, rng, **kwargs)


def run_offline(model, ego, schedule: NoiseSchedule, skel: Skeleton, W=60, K=10, seed=0,
                template=None, descriptor=None, guidance=None, observed=None, canonical=True,
                fps=30.0, on_tick=None) -> InteractionSequence:
    """Stream a whole ego track through a conveyor and collect the output.

    Args:
        model: object with ``predict(window) -> (h0, o0, c0)``.
        ego: array (N, 54) world-frame conditioning, N >= W.
        schedule: noise schedule.
        skel: skeleton.
        W, K: window width and context count.
        seed: seed of the conveyor noise.
        template: object template, or None for a motion-only run.
        descriptor: object descriptor fed to the model.
        guidance: GuidanceConfig or None (no guidance).
        observed: optional dict ``key -> (mask (N,), world rows (N, D))``.
        canonical: express windows in the head-anchored frame.
        fps: frame rate recorded on the output.
        on_tick: optional callback ``(conveyor, emitted_or_None)``.

    Returns:
        InteractionSequence with N frames in world coordinates.
    """
    ego = np.asarray(ego, dtype=float)
    n = len(ego)
    if n < W:
        raise SequenceTooShort(f"stream of {n} frames is shorter than the window {W}")
    rng = np.random.default_rng(seed)
    conv = conveyor_init(ego_head_pose(ego[0]), schedule, K, rng, skel, W, template=template,
                         descriptor=descriptor, guidance=guidance, canonical=canonical)
    observed = observed or {}
    out = []
    i = 0
    while len(out) < n:
        if i < n:
            obs = {k: rows[i] for k, (mask, rows) in observed.items() if mask[i]}
            conv.push(ego[i], obs, frame_id=i)
            i += 1
        frame = conv.tick(model)
        if on_tick is not None:
            on_tick(conv, frame)
        if frame is not None:
            out.append(frame)
    out.sort(key=lambda f: f.frame_id)
    human = HumanFrame(Se3(np.stack([f.human.root.rot for f in out]), np.stack([f.human.root.trans for f in out])),
                       np.stack([f.human.joint_rot for f in out]))
    if template is None:
        return InteractionSequence(human, fps=fps)
    obj = Se3(np.stack([f.obj.rot for f in out]), np.stack([f.obj.trans for f in out]))
    return InteractionSequence(human, obj, np.stack([f.contact for f in out]), template, fps)
