import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation, Slerp

from bimanual_cmp.kinematics import Pose, fk_and_jacobian, forward_kinematics, rot_z, rotation_about_axis, skew
from bimanual_cmp.task_space import (ABS_ANG, ABS_LIN, REL_ANG, REL_LIN, TASK_LABELS, TaskReference,
                                     absolute_pose, bimanual_jacobian, desired_velocities, relative_pose,
                                     task_coordinates, task_errors, task_vector)
from bimanual_cmp.harness.config import pose_from_xyzrpy

from conftest import random_q


def random_pose(rng):
    return Pose(rng.normal(size=3), Rotation.random(random_state=rng.integers(1 << 31)).as_matrix())


def test_task_ordering_is_shared():
    assert TASK_LABELS[ABS_LIN] == ("abs_x", "abs_y", "abs_z")
    assert TASK_LABELS[ABS_ANG] == ("abs_rx", "abs_ry", "abs_rz")
    assert TASK_LABELS[REL_LIN] == ("rel_x", "rel_y", "rel_z")
    assert TASK_LABELS[REL_ANG] == ("rel_rx", "rel_ry", "rel_rz")
    np.testing.assert_array_equal(task_vector([1, 2, 3], [4, 5, 6], [7, 8, 9], [10, 11, 12]), np.arange(1, 13))


def test_absolute_pose_examples():
    P = Pose([0.1, 0.2, 0.3], rot_z(0.4))
    p, R = absolute_pose(P, P)
    np.testing.assert_array_equal(p, P.p)
    np.testing.assert_allclose(R, P.R, atol=1e-15)
    p, R = absolute_pose(Pose([0, 0, 0]), Pose([1, 0, 0]))
    np.testing.assert_array_equal(p, [0.5, 0, 0])
    np.testing.assert_array_equal(R, np.eye(3))
    _, R = absolute_pose(Pose(), Pose(R=rot_z(np.pi / 2)))
    np.testing.assert_allclose(R, rot_z(np.pi / 4), atol=1e-15)


def test_absolute_orientation_is_quaternion_midpoint(rng):
    for _ in range(200):
        a, b = random_pose(rng), random_pose(rng)
        mid = Slerp([0, 1], Rotation.from_matrix([a.R, b.R]))([0.5]).as_matrix()[0]
        _, R = absolute_pose(a, b)
        assert np.abs(R - mid).max() <= 1e-9


def test_relative_pose_examples(rng):
    P = random_pose(rng)
    p, R = relative_pose(P, P)
    np.testing.assert_array_equal(p, 0.0)
    np.testing.assert_allclose(R, np.eye(3), atol=1e-15)
    p, _ = relative_pose(Pose([0, 1, 0]), Pose([0, -1, 0]))
    np.testing.assert_array_equal(p, [0, -2, 0])
    for _ in range(50):
        a, b = random_pose(rng), random_pose(rng)
        assert np.abs(a.R @ relative_pose(a, b)[1] - b.R).max() <= 1e-12


def test_relative_position_in_absolute_frame(rng):
    for _ in range(50):
        c = task_coordinates(random_pose(rng), random_pose(rng))
        assert np.abs(c.R_abs @ c.p_rel_abs - c.p_rel).max() <= 1e-12


def test_bimanual_jacobian_structure(rng):
    J = bimanual_jacobian(np.eye(6), np.eye(6))
    np.testing.assert_array_equal(J[:6], np.hstack([0.5 * np.eye(6), 0.5 * np.eye(6)]))
    np.testing.assert_array_equal(J[6:], np.hstack([-np.eye(6), np.eye(6)]))
    A = rng.normal(size=(6, 7))
    qd = rng.normal(size=7)
    np.testing.assert_allclose(bimanual_jacobian(A, A)[6:] @ np.concatenate([qd, qd]), 0.0, atol=1e-14)
    with pytest.raises(ValueError):
        bimanual_jacobian(np.eye(6), np.eye(6)[:, :5])


def _arms(lwr, y):
    return (lwr.with_base(pose_from_xyzrpy([0, y, 0, 0, 0, 0])), lwr.with_base(pose_from_xyzrpy([0, -y, 0, 0, 0, 0])))


def _fd_task_velocity(m1, m2, q1, q2, qd1, qd2, h=1e-6):
    def coords(s):
        return task_coordinates(forward_kinematics(m1, q1 + s * qd1), forward_kinematics(m2, q2 + s * qd2))
    a, b, c = coords(h), coords(-h), coords(0.0)
    v = np.zeros(12)
    v[ABS_LIN] = (a.p_abs - b.p_abs) / (2 * h)
    W = (a.R_abs - b.R_abs) / (2 * h) @ c.R_abs.T
    v[ABS_ANG] = [W[2, 1], W[0, 2], W[1, 0]]
    v[REL_LIN] = (a.p_rel - b.p_rel) / (2 * h)
    # d/dt (R1^T R2) = R1^T S(w2 - w1) R2
    W = c.R1 @ ((a.R_rel - b.R_rel) / (2 * h)) @ (c.R1 @ c.R_rel).T
    v[REL_ANG] = [W[2, 1], W[0, 2], W[1, 0]]
    return v


def test_stacked_jacobian_matches_finite_differences(lwr, rng):
    m1, m2 = _arms(lwr, 0.4)
    for _ in range(20):
        q1, q2 = random_q(lwr, rng), random_q(lwr, rng)
        qd1, qd2 = rng.normal(size=(2, 7))
        (_, J1), (_, J2) = fk_and_jacobian(m1, q1), fk_and_jacobian(m2, q2)
        v = bimanual_jacobian(J1, J2) @ np.concatenate([qd1, qd2])
        fd = _fd_task_velocity(m1, m2, q1, q2, qd1, qd2)
        # the absolute angular rows are exact only for aligned TCPs; see the next test
        rows = np.r_[0:3, 6:12]
        assert np.linalg.norm(v[rows] - fd[rows]) <= 1e-5 * np.linalg.norm(fd[rows])


def test_stacked_jacobian_exact_when_tcps_aligned(lwr, rng):
    m1, m2 = _arms(lwr, 0.4)
    for _ in range(20):
        q = random_q(lwr, rng)
        qd1, qd2 = rng.normal(size=(2, 7))
        (_, J1), (_, J2) = fk_and_jacobian(m1, q), fk_and_jacobian(m2, q)
        v = bimanual_jacobian(J1, J2) @ np.concatenate([qd1, qd2])
        fd = _fd_task_velocity(m1, m2, q, q, qd1, qd2)
        assert np.linalg.norm(v - fd) <= 1e-5 * np.linalg.norm(fd)


def test_identical_arms_equal_velocities_no_relative_motion(lwr, rng):
    q = random_q(lwr, rng)
    _, J = fk_and_jacobian(lwr, q)
    qd = rng.normal(size=7)
    assert np.abs(bimanual_jacobian(J, J)[6:] @ np.concatenate([qd, qd])).max() <= 1e-14


def test_errors_vanish_at_reference(rng):
    c = task_coordinates(random_pose(rng), random_pose(rng))
    assert np.abs(task_errors(c, TaskReference.hold(c))).max() <= 1e-12


@settings(max_examples=50)
@given(st.floats(-1e-3, 1e-3))
def test_small_rotation_error_is_angle(eps):
    c = task_coordinates(Pose(), Pose([0, -0.6, 0]))
    ref = TaskReference(c.p_abs, rot_z(eps) @ c.R_abs, c.p_rel_abs, c.R_rel)
    e = task_errors(c, ref)
    np.testing.assert_allclose(e[ABS_ANG], [0, 0, eps], atol=eps ** 2 + 1e-15)
    ref = TaskReference(c.p_abs, c.R_abs, c.p_rel_abs, rot_z(eps) @ c.R_rel)
    np.testing.assert_allclose(task_errors(c, ref)[REL_ANG], [0, 0, eps], atol=eps ** 2 + 1e-15)


def test_pure_absolute_offset_decouples(rng):
    c = task_coordinates(random_pose(rng), random_pose(rng))
    d = np.array([0.01, -0.02, 0.03])
    ref = TaskReference(c.p_abs + d, c.R_abs, c.p_rel_abs, c.R_rel)
    e = task_errors(c, ref)
    np.testing.assert_allclose(e[ABS_LIN], d, atol=1e-15)
    assert np.abs(e[6:]).max() <= 1e-12


def test_relative_error_is_world_frame(rng):
    c = task_coordinates(random_pose(rng), random_pose(rng))
    ref = TaskReference(c.p_abs, c.R_abs, c.p_rel_abs + [0.1, 0, 0], c.R_rel)
    np.testing.assert_allclose(task_errors(c, ref)[REL_LIN], c.R_abs @ [0.1, 0, 0], atol=1e-12)


def test_desired_velocities_examples(rng):
    c = task_coordinates(random_pose(rng), random_pose(rng))
    ref = TaskReference.hold(c)
    np.testing.assert_array_equal(desired_velocities(ref, c.R_abs, np.zeros(3)), 0.0)
    w = np.array([0.1, -0.2, 0.3])
    v = desired_velocities(ref, c.R_abs, w)
    np.testing.assert_allclose(v[REL_LIN], np.cross(w, c.R_abs @ c.p_rel_abs), atol=1e-15)


def test_transport_term_matches_finite_differences(rng):
    k = np.array([0.2, -0.4, 0.9])
    k /= np.linalg.norm(k)
    w = 0.7 * k
    R0 = Rotation.random(random_state=3).as_matrix()
    p = np.array([0.0, -0.6, 0.1])
    h = 1e-6

    def R(t):
        return rotation_about_axis(k, 0.7 * t) @ R0

    ref = TaskReference(np.zeros(3), R0, p, np.eye(3))
    for t in (0.0, 0.5, 2.0):
        fd = (R(t + h) @ p - R(t - h) @ p) / (2 * h)
        v = desired_velocities(ref, R(t), w)[REL_LIN]
        assert np.linalg.norm(v - fd) <= 1e-5 * np.linalg.norm(fd)


def test_skew_based_transport_sign():
    # omega x r with omega along z and r along x points along y
    np.testing.assert_allclose(skew([0, 0, 1]) @ [1, 0, 0], [0, 1, 0])
