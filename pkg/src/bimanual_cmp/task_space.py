"""Symmetric bimanual task coordinates.

The two TCP poses are mapped to an *absolute* frame (the midpoint of the
two TCPs, with an orientation halfway between them) and a *relative*
frame (TCP 2 seen from TCP 1). Stacked, they form a 12-entry task vector
in the fixed order

    [abs linear (3), abs angular (3), rel linear (3), rel angular (3)]

which every gain diagonal, error and velocity in the package follows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import Pose, axis_angle_from_rotation, rotation_about_axis, skew

__all__ = [
    "TASK_LABELS",
    "ABS_LIN",
    "ABS_ANG",
    "REL_LIN",
    "REL_ANG",
    "TaskCoordinates",
    "TaskReference",
    "absolute_pose",
    "relative_pose",
    "task_coordinates",
    "bimanual_jacobian",
    "task_errors",
    "desired_velocities",
    "task_velocity",
    "task_vector",
]

TASK_LABELS = ("abs_x", "abs_y", "abs_z", "abs_rx", "abs_ry", "abs_rz",
               "rel_x", "rel_y", "rel_z", "rel_rx", "rel_ry", "rel_rz")
ABS_LIN = slice(0, 3)
ABS_ANG = slice(3, 6)
REL_LIN = slice(6, 9)
REL_ANG = slice(9, 12)


def task_vector(abs_lin=(0, 0, 0), abs_ang=(0, 0, 0), rel_lin=(0, 0, 0), rel_ang=(0, 0, 0)) -> np.ndarray:
    """Assemble a 12-vector from its four blocks."""
    return np.concatenate([np.asarray(b, dtype=float).reshape(3) for b in (abs_lin, abs_ang, rel_lin, rel_ang)])


@dataclass(frozen=True)
class TaskCoordinates:
    """Absolute and relative task pose of a two-arm state.

    ``p_rel`` is in the world frame, ``p_rel_abs`` the same vector in the
    absolute frame; ``R_rel`` is TCP 2's orientation in TCP 1's frame.
    ``R1`` is kept because the relative orientation error is mapped to the
    world through it.
    """

    p_abs: np.ndarray
    R_abs: np.ndarray
    p_rel: np.ndarray
    R_rel: np.ndarray
    p_rel_abs: np.ndarray
    R1: np.ndarray


@dataclass(frozen=True)
class TaskReference:
    """Desired task pose and rates.

    Frames: absolute pose and rates in the world; relative position and its
    rate in the absolute frame; relative orientation in TCP 1's frame and
    its rate ``w_reld`` as used directly in the relative angular row.
    """

    p_absd: np.ndarray
    R_absd: np.ndarray
    p_reld_abs: np.ndarray
    R_reld: np.ndarray
    dp_absd: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_absd: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dp_reld_abs: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_reld: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def hold(cls, coords: TaskCoordinates) -> "TaskReference":
        """Reference that asks to stay exactly at ``coords``."""
        return cls(coords.p_abs.copy(), coords.R_abs.copy(), coords.p_rel_abs.copy(), coords.R_rel.copy())


def absolute_pose(pose1: Pose, pose2: Pose):
    """Midpoint position and half-way orientation ``R1 * rot(k12, theta12 / 2)``."""
    p_abs = 0.5 * (pose1.p + pose2.p)
    k, theta = axis_angle_from_rotation(pose1.R.T @ pose2.R)
    return p_abs, pose1.R @ rotation_about_axis(k, 0.5 * theta)


def relative_pose(pose1: Pose, pose2: Pose):
    """``p2 - p1`` (world) and ``R1^T R2`` (frame of TCP 1)."""
    return pose2.p - pose1.p, pose1.R.T @ pose2.R


def task_coordinates(pose1: Pose, pose2: Pose) -> TaskCoordinates:
    p_abs, R_abs = absolute_pose(pose1, pose2)
    p_rel, R_rel = relative_pose(pose1, pose2)
    return TaskCoordinates(p_abs, R_abs, p_rel, R_rel, R_abs.T @ p_rel, pose1.R.copy())


def bimanual_jacobian(J1, J2) -> np.ndarray:
    """Stacked ``[[J1/2, J2/2], [-J1, J2]]``.

    The relative rows are exact. The absolute angular rows give the mean of
    the two TCP angular velocities, which equals the rate of the half-way
    orientation exactly when the TCPs are aligned and to first order in
    their relative angle otherwise.
    """
    J1, J2 = np.asarray(J1, dtype=float), np.asarray(J2, dtype=float)
    if J1.shape != J2.shape or J1.shape[0] != 6:
        raise ValueError(f"Jacobians must both be 6 x n, got {J1.shape} and {J2.shape}")
    return np.block([[0.5 * J1, 0.5 * J2], [-J1, J2]])


def _column_error(R, R_d):
    # 1/2 (n x n_d + s x s_d + a x a_d)
    return 0.5 * np.cross(R.T, R_d.T).sum(axis=0)


def task_errors(coords: TaskCoordinates, ref: TaskReference) -> np.ndarray:
    """12-vector of pose errors, desired minus actual.

    Orientation errors use the column-wise cross-product form; the relative
    one is rotated into the world through ``R1``. The relative linear error
    is also world-frame: ``R_abs p_reld_abs - p_rel``.
    """
    e = np.empty(12)
    e[ABS_LIN] = ref.p_absd - coords.p_abs
    e[ABS_ANG] = _column_error(coords.R_abs, ref.R_absd)
    e[REL_LIN] = coords.R_abs @ ref.p_reld_abs - coords.p_rel
    e[REL_ANG] = coords.R1 @ _column_error(coords.R_rel, ref.R_reld)
    return e


def desired_velocities(ref: TaskReference, R_abs, omega_abs) -> np.ndarray:
    """Feed-forward task velocity.

    The relative linear row carries the transport term: a relative offset
    fixed in the absolute frame still moves in the world when that frame
    turns, ``R_abs dp_reld + omega_abs x (R_abs p_reld)``.
    """
    R_abs = np.asarray(R_abs, dtype=float)
    v = np.empty(12)
    v[ABS_LIN] = ref.dp_absd
    v[ABS_ANG] = ref.w_absd
    v[REL_LIN] = R_abs @ ref.dp_reld_abs + skew(omega_abs) @ (R_abs @ ref.p_reld_abs)
    v[REL_ANG] = ref.w_reld
    return v


def task_velocity(J, qdot) -> np.ndarray:
    """Actual task velocity ``J [qd1; qd2]`` from the stacked Jacobian."""
    return np.asarray(J) @ np.asarray(qdot, dtype=float)
