"""Serial-arm kinematics: DH forward kinematics, geometric Jacobians,
rotation helpers and (damped) pseudo-inverses.

All angles are radians, lengths metres. Frames follow the standard
(distal) Denavit-Hartenberg convention: the transform of link ``i`` is
``Rz(theta_i) Tz(d_i) Tx(a_i) Rx(alpha_i)`` and joint ``i`` rotates about
the z axis of frame ``i - 1``.

Joint indices are zero-based everywhere in the Python API. Configuration
files use one-based indices (``locked = 3`` means the third joint).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Pose",
    "LinkInertial",
    "RobotModel",
    "JointState",
    "forward_kinematics",
    "geometric_jacobian",
    "fk_and_jacobian",
    "fk_and_jacobian_from_frames",
    "link_frames",
    "skew",
    "axis_angle_from_rotation",
    "rotation_about_axis",
    "damped_pseudo_inverse",
    "robust_pseudo_inverse",
    "rot_x",
    "rot_y",
    "rot_z",
    "planar_arm",
]

AXIS_ANGLE_EPS = 1e-9
# Within this distance of pi the axis is taken from the symmetric part of R,
# which stays accurate where the sin(theta) divisor vanishes.
NEAR_PI_BAND = 1e-3
AUTO_DAMPING = 1e-3
AUTO_DAMPING_THRESHOLD = 1e-4


@dataclass(frozen=True)
class Pose:
    """Position ``p`` and rotation ``R`` of a frame."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    R: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3)
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "R", R)

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=float)
        return cls(T[:3, 3].copy(), T[:3, :3].copy())

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.p
        return T

    def compose(self, other: "Pose") -> "Pose":
        """Return ``self * other`` (``other`` expressed in this frame)."""
        return Pose(self.p + self.R @ other.p, self.R @ other.R)

    def inverse(self) -> "Pose":
        return Pose(-self.R.T @ self.p, self.R.T)

    def is_valid(self, tol: float = 1e-10) -> bool:
        return (np.allclose(self.R.T @ self.R, np.eye(3), atol=tol)
                and abs(np.linalg.det(self.R) - 1.0) <= tol)


@dataclass(frozen=True)
class LinkInertial:
    """Mass (kg), centre of mass in the link frame (m) and inertia about the
    centre of mass, expressed in the link frame (kg m^2)."""

    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(3))
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float).reshape(3, 3))
        if self.mass < 0:
            raise ValueError("link mass must be non-negative")
        if not np.allclose(self.inertia, self.inertia.T, atol=1e-12):
            raise ValueError("link inertia must be symmetric")


@dataclass(frozen=True)
class RobotModel:
    """Kinematic and inertial description of one serial arm.

    Attributes:
        dh: ``(n, 4)`` rows of ``(a, alpha, d, theta_offset)``.
        joint_limits: ``(n, 2)`` lower/upper bounds, informational only.
        base: pose of the robot base in the world frame.
        tcp: pose of the tool-centre-point in the last link frame.
        inertials: one :class:`LinkInertial` per link.
        locked: mapping of locked joint index to its fixed angle.
        armature: reflected rotor inertia added to each joint (kg m^2).
        name: free-form label.
    """

    dh: np.ndarray
    inertials: tuple
    base: Pose = field(default_factory=Pose)
    tcp: Pose = field(default_factory=Pose)
    joint_limits: np.ndarray | None = None
    locked: dict = field(default_factory=dict)
    armature: np.ndarray | None = None
    name: str = "arm"

    def __post_init__(self):
        dh = np.atleast_2d(np.asarray(self.dh, dtype=float))
        if dh.ndim != 2 or dh.shape[1] != 4 or dh.shape[0] < 1:
            raise ValueError("dh must have shape (n, 4) with n >= 1")
        n = dh.shape[0]
        object.__setattr__(self, "dh", dh)
        inertials = tuple(self.inertials)
        if len(inertials) != n:
            raise ValueError(f"expected {n} link inertials, got {len(inertials)}")
        for link in inertials:
            if np.linalg.eigvalsh(link.inertia).min() <= 0:
                raise ValueError("link inertia must be positive definite")
        object.__setattr__(self, "inertials", inertials)
        limits = (np.tile([-np.pi, np.pi], (n, 1)) if self.joint_limits is None
                  else np.asarray(self.joint_limits, dtype=float).reshape(n, 2))
        object.__setattr__(self, "joint_limits", limits)
        armature = (np.zeros(n) if self.armature is None
                    else np.broadcast_to(np.asarray(self.armature, dtype=float), (n,)).copy())
        object.__setattr__(self, "armature", armature)
        locked = {int(k): float(v) for k, v in dict(self.locked).items()}
        if any(k < 0 or k >= n for k in locked):
            raise ValueError("locked joint index out of range")
        object.__setattr__(self, "locked", locked)
        if not self.base.is_valid():
            raise ValueError("base rotation is not a proper rotation")

    @property
    def joint_count(self) -> int:
        return self.dh.shape[0]

    @cached_property
    def link_masses(self) -> np.ndarray:
        return np.array([link.mass for link in self.inertials])

    @cached_property
    def link_coms(self) -> np.ndarray:
        return np.array([link.com for link in self.inertials])

    @cached_property
    def link_inertias(self) -> np.ndarray:
        return np.array([link.inertia for link in self.inertials])

    @cached_property
    def free_mask(self) -> np.ndarray:
        mask = np.ones(self.joint_count, dtype=bool)
        mask[list(self.locked)] = False
        return mask

    def apply_locks(self, q) -> np.ndarray:
        """Return ``q`` with locked joints replaced by their fixed angles."""
        q = np.array(q, dtype=float)
        if q.shape != (self.joint_count,):
            raise ValueError(f"expected {self.joint_count} joint values, got shape {q.shape}")
        for k, v in self.locked.items():
            q[k] = v
        return q

    def with_locked(self, locked: dict) -> "RobotModel":
        return RobotModel(self.dh, self.inertials, self.base, self.tcp,
                          self.joint_limits, locked, self.armature, self.name)

    def with_base(self, base: Pose) -> "RobotModel":
        return RobotModel(self.dh, self.inertials, base, self.tcp,
                          self.joint_limits, self.locked, self.armature, self.name)


@dataclass
class JointState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if self.q.shape != self.qdot.shape:
            raise ValueError("q and qdot must have equal length")


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def link_frames(model: RobotModel, q):
    """World rotations and origins of frames ``0..n`` (frame 0 is the base).

    Returns:
        ``(R, p)`` with shapes ``(n + 1, 3, 3)`` and ``(n + 1, 3)``. Locked
        joints take their fixed angle whatever ``q`` holds.
    """
    q = model.apply_locks(q)
    n = model.joint_count
    a, alpha, d, offset = model.dh.T
    theta = q + offset
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    # Local DH rotation/translation for every link, built in one shot.
    Rl = np.empty((n, 3, 3))
    Rl[:, 0, 0] = ct
    Rl[:, 0, 1] = -st * ca
    Rl[:, 0, 2] = st * sa
    Rl[:, 1, 0] = st
    Rl[:, 1, 1] = ct * ca
    Rl[:, 1, 2] = -ct * sa
    Rl[:, 2, 0] = 0.0
    Rl[:, 2, 1] = sa
    Rl[:, 2, 2] = ca
    pl = np.stack([a * ct, a * st, d], axis=1)

    R = np.empty((n + 1, 3, 3))
    p = np.empty((n + 1, 3))
    R[0] = model.base.R
    p[0] = model.base.p
    for i in range(n):
        p[i + 1] = p[i] + R[i] @ pl[i]
        R[i + 1] = R[i] @ Rl[i]
    return R, p


def _tcp_from_frames(model, R, p):
    return Pose(p[-1] + R[-1] @ model.tcp.p, R[-1] @ model.tcp.R)


def _jacobian_from_frames(model, R, p, p_tcp):
    z = R[:-1, :, 2]
    J = np.empty((6, model.joint_count))
    J[:3] = np.cross(z, p_tcp - p[:-1]).T
    J[3:] = z.T
    if model.locked:
        J[:, list(model.locked)] = 0.0
    return J


def forward_kinematics(model: RobotModel, q) -> Pose:
    """World pose of the TCP: ``base * A_1(q_1) * ... * A_n(q_n) * tcp``."""
    R, p = link_frames(model, q)
    return _tcp_from_frames(model, R, p)


def geometric_jacobian(model: RobotModel, q) -> np.ndarray:
    """6 x n world-frame geometric Jacobian of the TCP, ``[pdot; omega] = J qdot``.

    Columns of locked joints are zero.
    """
    R, p = link_frames(model, q)
    tcp = _tcp_from_frames(model, R, p)
    return _jacobian_from_frames(model, R, p, tcp.p)


def fk_and_jacobian(model: RobotModel, q):
    """TCP pose and Jacobian from one pass over the chain."""
    return fk_and_jacobian_from_frames(model, link_frames(model, q))


def fk_and_jacobian_from_frames(model: RobotModel, frames):
    """Same as :func:`fk_and_jacobian` for precomputed ``link_frames`` output."""
    R, p = frames
    tcp = _tcp_from_frames(model, R, p)
    return tcp, _jacobian_from_frames(model, R, p, tcp.p)


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ w == cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_about_axis(k, theta) -> np.ndarray:
    """Rodrigues rotation by ``theta`` about the unit axis ``k``."""
    k = np.asarray(k, dtype=float).reshape(3)
    if abs(np.linalg.norm(k) - 1.0) > 1e-9:
        raise ValueError("rotation axis must be a unit vector")
    K = skew(k)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def axis_angle_from_rotation(R):
    """Unit axis ``k`` and angle ``theta`` in ``[0, pi]`` with
    ``rotation_about_axis(k, theta) == R``.

    The identity maps to ``((0, 0, 1), 0)``.
    """
    R = np.asarray(R, dtype=float)
    vee = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s2 = np.linalg.norm(vee)  # 2 sin(theta)
    c2 = np.trace(R) - 1.0    # 2 cos(theta)
    theta = float(np.arctan2(s2, c2))
    if theta < AXIS_ANGLE_EPS:
        return np.array([0.0, 0.0, 1.0]), 0.0
    if np.pi - theta > NEAR_PI_BAND:
        return vee / s2, theta
    # k k^T = (sym(R) - cos I) / (1 - cos); take the column with the largest pivot.
    cos_t = 0.5 * c2
    B = (0.5 * (R + R.T) - cos_t * np.eye(3)) / (1.0 - cos_t)
    j = int(np.argmax(np.diag(B)))
    k = B[:, j] / np.sqrt(B[j, j])
    if k @ vee < 0:
        k = -k
    return k / np.linalg.norm(k), theta


def damped_pseudo_inverse(M, lam: float = 0.0) -> np.ndarray:
    """Moore-Penrose inverse for ``lam == 0``, else ``M^T (M M^T + lam^2 I)^-1``."""
    M = np.asarray(M, dtype=float)
    if lam == 0.0:
        return np.linalg.pinv(M)
    m = M.shape[0]
    return np.linalg.solve(M @ M.T + lam * lam * np.eye(m), M).T


def robust_pseudo_inverse(M, lam: float = AUTO_DAMPING,
                          threshold: float = AUTO_DAMPING_THRESHOLD):
    """Pseudo-inverse that switches to damping near singularities.

    Returns:
        ``(M_pinv, damped)`` where ``damped`` tells whether the smallest
        singular value fell below ``threshold`` and damping was applied.
    """
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    damped = s.size > 0 and s.min() < threshold
    if damped:
        inv = s / (s * s + lam * lam)
    else:
        inv = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (Vt.T * inv) @ U.T, bool(damped)


def planar_arm(lengths=(1.0, 1.0), masses=(1.0, 1.0), radius: float = 0.02) -> RobotModel:
    """Planar chain of uniform rods rotating about parallel z axes.

    Handy as a test article: DH rows are ``(L_i, 0, 0, 0)`` and each rod's
    centre of mass sits halfway back along its link x axis.
    """
    inertials = []
    for L, m in zip(lengths, masses):
        axial = 0.5 * m * radius ** 2
        transverse = m * (3 * radius ** 2 + L ** 2) / 12.0
        inertials.append(LinkInertial(m, [-0.5 * L, 0.0, 0.0], np.diag([axial, transverse, transverse])))
    dh = np.array([[L, 0.0, 0.0, 0.0] for L in lengths])
    return RobotModel(dh, tuple(inertials), name="planar")
