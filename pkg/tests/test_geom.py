import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hoidiff.errors import DegenerateRotation
from hoidiff.geom import (IDENTITY_ROT6, Se3, axis_rotation, canonical_quat, geodesic_angle,
                          matrix_to_quat, matrix_to_rot6, quat_to_matrix, random_rotation,
                          rot6_to_matrix, se3_apply, se3_compose, se3_inverse)

RZ90 = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])


def test_rot6_examples():
    np.testing.assert_array_equal(rot6_to_matrix([1, 0, 0, 0, 1, 0]), np.eye(3))
    np.testing.assert_array_equal(rot6_to_matrix([2, 0, 0, 0, 3, 0]), np.eye(3))
    m = rot6_to_matrix([0, 1, 0, -1, 0, 0])
    np.testing.assert_allclose(m, RZ90, atol=1e-15)
    # x axis goes to y, y axis to -x
    np.testing.assert_allclose(m @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(m @ [0, 1, 0], [-1, 0, 0], atol=1e-15)


def test_matrix_to_rot6_examples():
    np.testing.assert_array_equal(matrix_to_rot6(np.eye(3)), IDENTITY_ROT6)
    np.testing.assert_array_equal(matrix_to_rot6(RZ90), [0, 1, 0, -1, 0, 0])


@pytest.mark.parametrize("bad", [[0, 0, 0, 0, 1, 0], [1, 0, 0, 2, 0, 0], [1, 0, 0, 0, 0, 0],
                                 [1e-9, 0, 0, 0, 1, 0]])
def test_degenerate_rot6_raises(bad):
    with pytest.raises(DegenerateRotation):
        rot6_to_matrix(bad)


def test_round_trip_random(rng):
    r = random_rotation(rng, 1000)
    np.testing.assert_allclose(rot6_to_matrix(matrix_to_rot6(r)), r, atol=1e-12)
    np.testing.assert_allclose(quat_to_matrix(matrix_to_quat(r)), r, atol=1e-12)
    assert np.abs(np.swapaxes(r, -1, -2) @ r - np.eye(3)).max() < 1e-12
    np.testing.assert_allclose(np.linalg.det(r), 1.0, atol=1e-12)


def test_quat_examples(rng):
    np.testing.assert_array_equal(matrix_to_quat(np.eye(3)), [1, 0, 0, 0])
    np.testing.assert_allclose(matrix_to_quat(axis_rotation("x", np.pi)), [0, 1, 0, 0], atol=1e-15)
    q = matrix_to_quat(random_rotation(rng, 500))
    assert (q[:, 0] >= 0).all()
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(matrix_to_quat(quat_to_matrix(q)), q, atol=1e-12)


def test_canonical_quat_zero_w_tie_break():
    np.testing.assert_array_equal(canonical_quat([0.0, 0.0, -1.0, 0.0]), [0, 0, 1, 0])
    np.testing.assert_array_equal(canonical_quat([-0.5, 0.5, 0.5, 0.5]), [0.5, -0.5, -0.5, -0.5])


def test_geodesic_examples(rng):
    r = random_rotation(rng)
    assert geodesic_angle(r, r) == pytest.approx(0.0, abs=1e-6)
    assert geodesic_angle(np.eye(3), RZ90) == pytest.approx(90.0, abs=1e-12)
    assert geodesic_angle(np.eye(3), axis_rotation("x", np.pi)) == pytest.approx(180.0, abs=1e-12)
    a, b = random_rotation(rng, 100), random_rotation(rng, 100)
    np.testing.assert_allclose(geodesic_angle(a, b), geodesic_angle(b, a), atol=1e-9)


def test_se3_examples(rng):
    x = Se3(matrix_to_rot6(random_rotation(rng)), rng.normal(size=3))
    y = se3_compose(Se3.identity(), x)
    np.testing.assert_allclose(y.to_row(), x.to_row(), atol=1e-15)
    t = np.array([0.3, -2.0, 1.5])
    inv = se3_inverse(Se3(IDENTITY_ROT6, t))
    np.testing.assert_allclose(inv.trans, -t)
    np.testing.assert_allclose(inv.rot, IDENTITY_ROT6)


def _random_se3(rng, n):
    return Se3(matrix_to_rot6(random_rotation(rng, n)), rng.normal(size=(n, 3)) * 3)


def test_se3_group_laws(rng):
    a, b, c = (_random_se3(rng, 2000) for _ in range(3))
    ident = se3_compose(a, se3_inverse(a))
    np.testing.assert_allclose(ident.matrix, np.broadcast_to(np.eye(3), (2000, 3, 3)), atol=1e-9)
    np.testing.assert_allclose(ident.trans, 0, atol=1e-9)
    left = se3_compose(se3_compose(a, b), c)
    right = se3_compose(a, se3_compose(b, c))
    np.testing.assert_allclose(left.homogeneous(), right.homogeneous(), atol=1e-9)
    p = rng.normal(size=(2000, 5, 3))
    np.testing.assert_allclose(se3_apply(se3_compose(a, b), p), se3_apply(a, se3_apply(b, p)), atol=1e-9)


def test_se3_matches_homogeneous_matrices(rng):
    a, b = _random_se3(rng, 50), _random_se3(rng, 50)
    np.testing.assert_allclose(se3_compose(a, b).homogeneous(), a.homogeneous() @ b.homogeneous(), atol=1e-12)
    np.testing.assert_allclose(se3_inverse(a).homogeneous(), np.linalg.inv(a.homogeneous()), atol=1e-10)
    p = rng.normal(size=(50, 4, 3))
    ph = np.concatenate([p, np.ones((50, 4, 1))], axis=-1)
    expect = np.einsum("nij,npj->npi", a.homogeneous(), ph)[..., :3]
    np.testing.assert_allclose(se3_apply(a, p), expect, atol=1e-12)


vec6 = arrays(np.float64, 6, elements=st.floats(-10, 10))


@given(vec6, st.floats(0.01, 100))
def test_first_column_scale_invariance(r, s):
    a1, a2 = r[:3], r[3:]
    if np.linalg.norm(a1) < 1e-3 or np.linalg.norm(np.cross(a1, a2)) < 1e-3 * np.linalg.norm(a2) * np.linalg.norm(a1) \
            or np.linalg.norm(a2) < 1e-3:
        return
    scaled = np.concatenate([a1 * s, a2])
    np.testing.assert_allclose(rot6_to_matrix(scaled), rot6_to_matrix(r), atol=1e-9)


@given(vec6)
def test_gram_schmidt_output_is_rotation(r):
    try:
        m = rot6_to_matrix(r)
    except DegenerateRotation:
        return
    np.testing.assert_allclose(m.T @ m, np.eye(3), atol=1e-9)
    assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(m[:, 0], r[:3] / np.linalg.norm(r[:3]), atol=1e-12)
