import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoidiff.body import ObjectFrame, compute_contacts, fk, fk_global
from hoidiff.canon import head_pose
from hoidiff.dataset import (InteractionSequence, read_sequence, sample_batch, window_batches, world_ego,
                             write_sequence, _Prepared)
from hoidiff.errors import FormatError, InvalidConfig, SequenceTooShort
from hoidiff.geom import Se3, se3_compose, se3_inverse
from hoidiff.metrics import fc
from hoidiff.network import object_descriptor
from hoidiff.scenarios import SCENARIOS, ScenarioConfig, gen_scenario

from helpers import scenario


def test_idle_walk_is_motion_only_and_grounded(skel):
    seq = scenario("idle-walk", 3, frames=90)
    assert seq.motion_only and seq.contacts is None
    assert fc(fk(skel, seq.human), skel.foot_indices) == 1.0


@pytest.mark.parametrize("kind", ["carry", "push", "place"])
def test_held_phase_has_body_contact(kind):
    seq = scenario(kind, 4, frames=120)
    g, r = seq.meta["grasp"], seq.meta["release"]
    assert r > g
    assert (seq.contacts[g:r, :64].sum(axis=1) >= 1).all()


@pytest.mark.parametrize("kind", SCENARIOS)
def test_generated_contacts_match_geometry(skel, kind):
    seq = scenario(kind, 5, frames=90)
    if seq.motion_only:
        return
    again = compute_contacts(skel, seq.human, seq.template, ObjectFrame(seq.obj))
    np.testing.assert_array_equal(seq.contacts, again)


@pytest.mark.parametrize("kind", ["carry", "place"])
def test_object_rigid_to_wrist_while_held(skel, kind):
    seq = scenario(kind, 6, frames=120)
    g, r = seq.meta["grasp"], seq.meta["release"]
    rots, pos = fk_global(skel, seq.human)
    w = skel.index("right_wrist")
    wrist = Se3.from_matrix(rots[:, w], pos[:, w])
    rel = se3_compose(se3_inverse(wrist), seq.obj)
    h = rel.homogeneous()[g:r]
    np.testing.assert_allclose(h, np.broadcast_to(h[0], h.shape), atol=1e-9)


@pytest.mark.parametrize("kind", SCENARIOS)
def test_feet_touch_floor(skel, kind):
    seq = scenario(kind, 7, frames=90)
    z = fk(skel, seq.human)[:, skel.foot_indices, 2]
    np.testing.assert_allclose(z.min(axis=1), 0.0, atol=1e-12)


def test_same_seed_bitwise():
    cfg = ScenarioConfig(scenario="push", frames=70, seed=11, n_vertices=32)
    a, b = gen_scenario(cfg), gen_scenario(cfg)
    np.testing.assert_array_equal(a.human.to_row(), b.human.to_row())
    np.testing.assert_array_equal(a.obj.to_row(), b.obj.to_row())
    np.testing.assert_array_equal(a.contacts, b.contacts)
    c = gen_scenario(ScenarioConfig(scenario="push", frames=70, seed=12, n_vertices=32))
    assert not np.array_equal(a.human.to_row(), c.human.to_row())


@pytest.mark.parametrize("bad", [dict(scenario="dance"), dict(frames=30), dict(object_class=40), dict(jitter=-1)])
def test_invalid_scenario_config(bad):
    with pytest.raises(InvalidConfig):
        gen_scenario(ScenarioConfig(**{"frames": 60, **bad}))


def test_jitter_perturbs_motion():
    base = gen_scenario(ScenarioConfig(scenario="idle-walk", frames=60, seed=2))
    noisy = gen_scenario(ScenarioConfig(scenario="idle-walk", frames=60, seed=2, jitter=0.01))
    assert not np.array_equal(base.human.joint_rot, noisy.human.joint_rot)


@pytest.mark.parametrize("kind", ["carry", "idle-walk"])
def test_round_trip_bitwise(tmp_path, kind):
    seq = scenario(kind, 8, frames=64)
    seq.meta["note"] = "x"
    path = tmp_path / "s.jsonl"
    write_sequence(seq, path)
    back = read_sequence(path)
    np.testing.assert_array_equal(back.human.to_row(), seq.human.to_row())
    assert back.meta == seq.meta and back.fps == seq.fps
    if not seq.motion_only:
        np.testing.assert_array_equal(back.obj.to_row(), seq.obj.to_row())
        np.testing.assert_array_equal(back.contacts, seq.contacts)
        np.testing.assert_array_equal(back.template.vertices, seq.template.vertices)
    else:
        assert back.motion_only


def _written(tmp_path):
    path = tmp_path / "s.jsonl"
    write_sequence(scenario("carry", 8, frames=64), path)
    return path, path.read_text().splitlines()


def test_truncated_file(tmp_path):
    path, lines = _written(tmp_path)
    path.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(FormatError, match="truncated"):
        read_sequence(path)
    path.write_text("\n".join(lines[:-1]) + "\n" + lines[-1][:40])
    with pytest.raises(FormatError):
        read_sequence(path)


def test_old_version_rejected(tmp_path):
    path, lines = _written(tmp_path)
    head = json.loads(lines[0])
    head["format"] = "seq/0"
    path.write_text("\n".join([json.dumps(head)] + lines[1:]) + "\n")
    with pytest.raises(FormatError, match="version"):
        read_sequence(path)


@pytest.mark.parametrize("mutate", [
    lambda r: r.pop("root"),
    lambda r: r.__setitem__("pose", r["pose"][:-1]),
    lambda r: r.__setitem__("object", None),
    lambda r: r.__setitem__("contact", [2] * 68),
])
def test_bad_frame_fields(tmp_path, mutate):
    path, lines = _written(tmp_path)
    rec = json.loads(lines[5])
    mutate(rec)
    lines[5] = json.dumps(rec)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError):
        read_sequence(path)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_sequence(tmp_path / "nope.jsonl")


def test_sequence_validation():
    seq = scenario("carry", 8, frames=64)
    with pytest.raises(SequenceTooShort):
        InteractionSequence(seq.human[:1])
    with pytest.raises(ValueError):
        InteractionSequence(seq.human, seq.obj)


def _prepared(skel, seqs):
    return [_Prepared(skel, s, lambda t: object_descriptor(t, 33)) for s in seqs]


def test_window_of_full_length_sequence(skel):
    seq = scenario("carry", 9, frames=60)
    b = next(window_batches([seq], 60, 3, np.random.default_rng(0), skel))
    assert b.h.shape == (3, 60, 135)
    np.testing.assert_array_equal(b.h[0], b.h[1])
    np.testing.assert_array_equal(b.h[1], b.h[2])


def test_windows_are_canonical(skel, rng):
    seqs = [scenario("carry", 9, frames=80), scenario("idle-walk", 9, frames=80)]
    batches = window_batches(seqs, 20, 8, rng, skel)
    for _ in range(3):
        b = next(batches)
        assert b.h.shape[1] == b.o.shape[1] == b.ego.shape[1] == 20
        for i, a in enumerate(b.anchors):
            np.testing.assert_array_equal(a.matrix[:, 2], [0, 0, 1])
            # the first frame's head sits at the origin facing +x after canonicalization
            np.testing.assert_allclose(b.ego[i, 0, 36:39], 0, atol=1e-9)
            head = b.ego[i, 0, 0:6]
            assert head[1] == pytest.approx(0, abs=1e-9) and head[0] > 0
        assert (b.motion_only == ~b.descriptor[:, :33].any(axis=1)).all()


def test_short_sequences_rejected(skel, rng):
    with pytest.raises(SequenceTooShort):
        next(window_batches([scenario("carry", 9, frames=60)], 61, 2, rng, skel))


def test_world_ego_matches_head_fk(skel):
    seq = scenario("push", 10, frames=60)
    ego = world_ego(skel, seq)
    np.testing.assert_allclose(ego[:, 36:39], head_pose(skel, seq.human).trans, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(SCENARIOS), st.integers(0, 10_000), st.integers(60, 90))
def test_generator_properties(kind, seed, frames):
    from hoidiff.body import load_skeleton
    skel = load_skeleton()
    seq = gen_scenario(ScenarioConfig(scenario=kind, frames=frames, seed=seed, n_vertices=32))
    assert len(seq) == frames
    z = fk(skel, seq.human)[:, skel.foot_indices, 2]
    assert z.min() > -1e-9
    if not seq.motion_only:
        assert seq.contacts.shape == (frames, 68)
        again = compute_contacts(skel, seq.human, seq.template, ObjectFrame(seq.obj))
        np.testing.assert_array_equal(seq.contacts, again)
