"""Rigid-body dynamics of a serial arm with an optional rigidly attached payload.

Inverse dynamics is recursive Newton-Euler in the world frame. The forward
problem builds the joint-space mass matrix column by column from
unit-acceleration inverse-dynamics calls; all columns plus the bias
(Coriolis, centrifugal, gravity) term go through a single batched pass.

Locked joints are constraints: they keep their fixed angle, have zero
velocity and acceleration, and are left out of the forward solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kinematics import LinkInertial, RobotModel, fk_and_jacobian, link_frames

__all__ = [
    "GRAVITY",
    "Payload",
    "with_payload",
    "inverse_dynamics",
    "mass_matrix",
    "bias_torques",
    "forward_dynamics",
    "mass_and_bias_from_frames",
    "inverse_dynamics_from_frames",
    "solve_free",
    "kinetic_energy",
    "potential_energy",
    "kinetic_energy_gradient",
    "DynamicsError",
]

GRAVITY = np.array([0.0, 0.0, -9.81])


class DynamicsError(RuntimeError):
    pass


@dataclass(frozen=True)
class Payload:
    """Point-mass load rigidly held at the TCP; ``com`` is in the TCP frame."""

    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("payload mass must be non-negative")
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(3))


def with_payload(model: RobotModel, payload: Payload | None) -> RobotModel:
    """Return ``model`` with ``payload`` lumped into the last link."""
    if payload is None or payload.mass == 0.0:
        return model
    last = model.inertials[-1]
    r_load = model.tcp.p + model.tcp.R @ payload.com
    m = last.mass + payload.mass
    com = (last.mass * last.com + payload.mass * r_load) / m

    def shifted(I, mass, r):
        # parallel-axis shift of an inertia from its own com to ``com``
        d = r - com
        return I + mass * (d @ d * np.eye(3) - np.outer(d, d))

    inertia = shifted(last.inertia, last.mass, last.com) + shifted(np.zeros((3, 3)), payload.mass, r_load)
    inertials = model.inertials[:-1] + (LinkInertial(m, com, inertia),)
    return RobotModel(model.dh, inertials, model.base, model.tcp, model.joint_limits,
                      model.locked, model.armature, model.name)


def _cross(a, b):
    """Cross product along axis 1 of ``(n, 3, k)`` arrays (broadcasting)."""
    a0, a1, a2 = a[:, 0], a[:, 1], a[:, 2]
    b0, b1, b2 = b[:, 0], b[:, 1], b[:, 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=1)


class _Geometry:
    """Per-configuration quantities shared by every column of a batched pass."""

    __slots__ = ("p", "z", "r", "rc", "com", "inertia", "mass", "n")

    def __init__(self, model: RobotModel, q=None, frames=None):
        R, p = frames if frames is not None else link_frames(model, q)
        self.n = model.joint_count
        self.p = p[:-1, :, None]                       # joint origins
        self.z = R[:-1, :, 2][:, :, None]              # joint axes
        self.r = (p[1:] - p[:-1])[:, :, None]          # joint origin -> next origin
        com = p[1:] + np.einsum("nij,nj->ni", R[1:], model.link_coms)
        self.com = com[:, :, None]
        self.rc = (com - p[1:])[:, :, None]
        self.inertia = R[1:] @ model.link_inertias @ R[1:].transpose(0, 2, 1)
        self.mass = model.link_masses[:, None, None]


def _rcumsum(a):
    return np.cumsum(a[::-1], axis=0)[::-1]


def _rnea(model: RobotModel, geo: _Geometry, qd, qdd, grav):
    """Batched Newton-Euler; ``qd``/``qdd`` are ``(n, k)``, ``grav`` is ``(3, k)``.

    The outward and inward link recursions are written as cumulative sums
    over the link axis, so each column costs a handful of array operations.
    """
    zqd = geo.z * qd[:, None, :]
    w = np.cumsum(zqd, axis=0)
    w_prev = w - zqd
    wd = np.cumsum(geo.z * qdd[:, None, :] + _cross(w_prev, zqd), axis=0)
    a = np.cumsum(_cross(wd, geo.r) + _cross(w, _cross(w, geo.r)), axis=0) - grav[None]
    ac = a + _cross(wd, geo.rc) + _cross(w, _cross(w, geo.rc))
    F = geo.mass * ac
    Iw = geo.inertia @ w
    N = geo.inertia @ wd + _cross(w, Iw)
    # moment about each joint origin of everything outboard of it
    m = _rcumsum(N + _cross(geo.com, F)) - _cross(geo.p, _rcumsum(F))
    tau = np.einsum("nik,nik->nk", geo.z, m)
    return tau + model.armature[:, None] * qdd


def _zero_locked(model, v):
    v = np.array(v, dtype=float)
    if v.shape != (model.joint_count,):
        raise ValueError(f"expected {model.joint_count} joint values, got shape {v.shape}")
    if model.locked:
        v[list(model.locked)] = 0.0
    return v


def inverse_dynamics(model: RobotModel, q, qdot, qddot, gravity=GRAVITY,
                     payload: Payload | None = None) -> np.ndarray:
    """Joint torques ``M(q) qdd + C(q, qd) qd + g(q)`` for the arm plus payload."""
    model = with_payload(model, payload)
    geo = _Geometry(model, q)
    qd = _zero_locked(model, qdot)[:, None]
    qdd = _zero_locked(model, qddot)[:, None]
    g = np.asarray(gravity, dtype=float).reshape(3, 1)
    return _rnea(model, geo, qd, qdd, g)[:, 0]


def mass_and_bias_from_frames(model: RobotModel, frames, qdot, gravity=GRAVITY):
    """Mass matrix and bias torques from precomputed ``link_frames`` output."""
    return _mass_and_bias(model, None, qdot, gravity, frames)


def inverse_dynamics_from_frames(model: RobotModel, frames, qdot, qddot, gravity=GRAVITY):
    geo = _Geometry(model, frames=frames)
    qd = _zero_locked(model, qdot)[:, None]
    qdd = _zero_locked(model, qddot)[:, None]
    return _rnea(model, geo, qd, qdd, np.asarray(gravity, dtype=float).reshape(3, 1))[:, 0]


def solve_free(model: RobotModel, M, rhs) -> np.ndarray:
    """Solve ``M qdd = rhs`` over the unlocked joints; locked joints get 0."""
    free = model.free_mask
    qdd = np.zeros(model.joint_count)
    Mf = M[np.ix_(free, free)] if model.locked else M
    try:
        L = np.linalg.cholesky(Mf)
    except np.linalg.LinAlgError as exc:
        raise DynamicsError(f"mass matrix not positive definite, eigenvalues "
                            f"{np.linalg.eigvalsh(Mf)}") from exc
    qdd[free] = scipy.linalg.cho_solve((L, True), rhs[free])
    return qdd


def _mass_and_bias(model: RobotModel, q, qdot, gravity, frames=None):
    geo = _Geometry(model, q, frames)
    n = model.joint_count
    qd = np.zeros((n, n + 1))
    qd[:, -1] = _zero_locked(model, qdot)
    qdd = np.zeros((n, n + 1))
    qdd[:, :n] = np.eye(n)
    grav = np.zeros((3, n + 1))
    grav[:, -1] = gravity
    out = _rnea(model, geo, qd, qdd, grav)
    M = out[:, :n]
    return 0.5 * (M + M.T), out[:, -1]


def mass_matrix(model: RobotModel, q, payload: Payload | None = None) -> np.ndarray:
    """Joint-space inertia matrix (all joints, locked ones included)."""
    model = with_payload(model, payload)
    return _mass_and_bias(model, q, np.zeros(model.joint_count), np.zeros(3))[0]


def bias_torques(model: RobotModel, q, qdot, gravity=GRAVITY,
                 payload: Payload | None = None) -> np.ndarray:
    """Coriolis, centrifugal and gravity torques (inverse dynamics at zero acceleration)."""
    return inverse_dynamics(model, q, qdot, np.zeros(model.joint_count), gravity, payload)


def _momenta(model: RobotModel, geo: _Geometry, qd):
    """Link twists (origin-referenced) and link momenta about the world origin."""
    z, p = geo.z[:, :, 0], geo.p[:, :, 0]
    s_lin = np.cross(p, z)                        # linear part of each joint twist
    w = np.cumsum(z * qd[:, None], axis=0)
    v0 = np.cumsum(s_lin * qd[:, None], axis=0)   # velocity of the point at the origin
    com = geo.com[:, :, 0]
    lin = geo.mass[:, :, 0] * (v0 + np.cross(w, com))
    ang = np.einsum("nij,nj->ni", geo.inertia, w) + np.cross(com, lin)
    return z, s_lin, w, v0, lin, ang


def kinetic_energy(model: RobotModel, q, qdot, frames=None) -> float:
    geo = _Geometry(model, q, frames)
    qd = _zero_locked(model, qdot)
    _, _, w, v0, lin, ang = _momenta(model, geo, qd)
    return 0.5 * float(np.sum(w * ang) + np.sum(v0 * lin) + qd @ (model.armature * qd))


def potential_energy(model: RobotModel, q, gravity=GRAVITY, frames=None) -> float:
    geo = _Geometry(model, q, frames)
    return -float(np.sum(geo.mass[:, 0, 0] * (geo.com[:, :, 0] @ np.asarray(gravity, dtype=float))))


def kinetic_energy_gradient(model: RobotModel, q, qdot, frames=None) -> np.ndarray:
    """Partial derivative of the kinetic energy in ``q`` at fixed ``qdot``.

    Turning joint ``j`` rotates everything outboard of it, so the gradient
    is the pairing of the subtree momentum with the rate of change of the
    joint's own screw axis, ``[V_parent, S_j]``.
    """
    geo = _Geometry(model, q, frames)
    qd = _zero_locked(model, qdot)
    z, s_lin, w, v0, lin, ang = _momenta(model, geo, qd)
    w_par = w - z * qd[:, None]
    v_par = v0 - s_lin * qd[:, None]
    dz = np.cross(w_par, z)
    ds = np.cross(w_par, s_lin) - np.cross(z, v_par)
    grad = np.sum(dz * _rcumsum(ang), axis=1) + np.sum(ds * _rcumsum(lin), axis=1)
    if model.locked:
        grad[list(model.locked)] = 0.0
    return grad


def forward_dynamics(model: RobotModel, q, qdot, tau_applied, external_wrench=None,
                     payload: Payload | None = None, gravity=GRAVITY) -> np.ndarray:
    """Joint accelerations solving ``M qdd = tau + J^T w - C qd - g``.

    ``external_wrench`` is a force/moment 6-vector acting at the TCP, in the
    world frame. Locked joints get zero acceleration.
    """
    model = with_payload(model, payload)
    M, bias = _mass_and_bias(model, q, qdot, np.asarray(gravity, dtype=float))
    rhs = np.asarray(tau_applied, dtype=float) - bias
    if external_wrench is not None:
        _, J = fk_and_jacobian(model, q)
        rhs = rhs + J.T @ np.asarray(external_wrench, dtype=float)
    return solve_free(model, M, rhs)
