"""Fast property checks behind ``bimanual-cmp validate``.

Each check returns a :class:`Check`; none of them needs a learned CMP, so
the whole suite runs in a few seconds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import dynamics as dyn
from .. import oracles
from ..controllers import end_effector_force_estimate, virtual_force_translation
from ..kinematics import (damped_pseudo_inverse, fk_and_jacobian, forward_kinematics, planar_arm,
                          rotation_about_axis)
from ..primitives import encode_dmp, integrate_dmp
from ..simulation import Plant, SimState, step
from .config import builtin_config, load_robot_model

__all__ = [
    "Check",
    "run_all",
    "check_jacobian",
    "check_penrose",
    "check_dynamics",
    "check_energy",
    "check_dmp",
    "check_virtual_work",
]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _lwr(locked=None):
    model = load_robot_model(builtin_config("lwr4.ini"))
    return model.with_locked(locked) if locked else model


def _random_q(model, rng):
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    return rng.uniform(0.9 * lo, 0.9 * hi)


def fd_jacobian(model, q, h: float = 1e-6) -> np.ndarray:
    """Central differences of forward kinematics; angular rows from ``dR R^T``."""
    n = model.joint_count
    J = np.zeros((6, n))
    free = model.free_mask
    for j in range(n):
        if not free[j]:
            continue
        dq = np.zeros(n)
        dq[j] = h
        a, b = forward_kinematics(model, q + dq), forward_kinematics(model, q - dq)
        J[:3, j] = (a.p - b.p) / (2 * h)
        W = (a.R - b.R) / (2 * h) @ forward_kinematics(model, q).R.T
        J[3:, j] = 0.5 * np.array([W[2, 1] - W[1, 2], W[0, 2] - W[2, 0], W[1, 0] - W[0, 1]])
    return J


def check_jacobian(samples: int = 100, seed: int = 0, tol: float = 1e-6, budget: float = 5.0) -> Check:
    rng = np.random.default_rng(seed)
    model = _lwr()
    started = time.perf_counter()
    worst = 0.0
    for _ in range(samples):
        q = _random_q(model, rng)
        _, J = fk_and_jacobian(model, q)
        Jfd = fd_jacobian(model, q)
        worst = max(worst, np.linalg.norm(J - Jfd) / max(np.linalg.norm(J), 1e-12))
    elapsed = time.perf_counter() - started
    return Check("Jacobian vs finite differences", worst <= tol and elapsed < budget,
                 f"max rel error {worst:.2e} over {samples} configs in {elapsed:.2f} s")


def penrose_residuals(M, P) -> tuple:
    """The four Penrose conditions as residual norms."""
    return (np.abs(M @ P @ M - M).max(), np.abs(P @ M @ P - P).max(),
            np.abs((M @ P).T - M @ P).max(), np.abs((P @ M).T - P @ M).max())


def check_penrose(seed: int = 0, tol: float = 1e-9) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for shape in ((6, 6), (6, 7), (12, 12)):
        M = rng.normal(size=shape)
        worst = max(worst, *penrose_residuals(M, damped_pseudo_inverse(M, 0.0)))
    return Check("Penrose conditions (lambda = 0)", worst <= tol, f"max residual {worst:.2e}")


def check_dynamics(samples: int = 50, seed: int = 0, tol: float = 1e-8) -> Check:
    rng = np.random.default_rng(seed)
    model = _lwr()
    id_err = rt_err = 0.0
    spd = True
    for _ in range(samples):
        q = _random_q(model, rng)
        qd, qdd = rng.normal(size=(2, model.joint_count))
        tau = dyn.inverse_dynamics(model, q, qd, qdd)
        ref = oracles.lagrangian_inverse_dynamics(model, q, qd, qdd)
        id_err = max(id_err, np.abs(tau - ref).max() / max(1.0, np.abs(ref).max()))
        rt_err = max(rt_err, np.abs(dyn.forward_dynamics(model, q, qd, tau) - qdd).max())
        M = dyn.mass_matrix(model, q)
        spd &= bool(np.allclose(M, M.T, atol=1e-12) and np.linalg.eigvalsh(M).min() > 0)
    ok = id_err <= tol and rt_err <= tol and spd
    return Check("Inverse dynamics vs Lagrangian oracle", ok,
                 f"ID error {id_err:.2e}, ID/FD round trip {rt_err:.2e}, mass matrix SPD {spd}")


def energy_drift(duration: float = 10.0, dt: float = 0.002, q0=(0.7, -1.1), qd0=(1.5, -2.0)) -> float:
    """Relative total-energy drift of a free, frictionless, gravity-free planar 2-link chain."""
    model = planar_arm()
    plant = Plant([model], friction=0.0, gravity=np.zeros(3))
    state = SimState(0.0, [np.array(q0, dtype=float)], [np.array(qd0, dtype=float)])
    zero = [np.zeros(2)]

    def energy(s):
        return dyn.kinetic_energy(model, s.q[0], s.qdot[0])

    e0 = energy(state)
    worst = 0.0
    for _ in range(int(round(duration / dt))):
        state = step(plant, state, zero, None, dt)
        worst = max(worst, abs(energy(state) - e0))
    return worst / e0


def check_energy(tol: float = 5e-3) -> Check:
    drift = energy_drift()
    return Check("Energy conservation (free 2-link chain, 10 s)", drift <= tol, f"max drift {100 * drift:.3f} %")


def min_jerk(t, start, goal):
    s = np.clip(t / t[-1], 0.0, 1.0)[:, None]
    return start + (goal - start) * s ** 3 * (10 - 15 * s + 6 * s ** 2)


def check_dmp(tol: float = 1e-3) -> Check:
    dt = 0.002
    t = np.arange(0.0, 3.0 + dt / 2, dt)
    y = min_jerk(t, np.array([0.1, -0.5, 0.0, 1.2, 0.3, -0.7, 0.2]),
                 np.array([0.6, -0.1, 0.0, 0.9, -0.2, -1.1, 0.5]))
    dmp = encode_dmp(y, dt, n_kernels=25)
    roll = integrate_dmp(dmp, dt)
    rmse = float(np.sqrt(np.mean((roll.y - y) ** 2)))
    tail = integrate_dmp(dmp, dt, duration=3 * dmp.tau)
    goal = float(np.abs(tail.y[-1] - dmp.goal).max())
    return Check("DMP round trip (min-jerk, 25 kernels)", rmse <= tol and goal <= tol,
                 f"RMSE {rmse:.2e} rad, goal error at 3 tau {goal:.2e} rad")


def check_virtual_work(seed: int = 0, tol: float = 1e-9) -> Check:
    rng = np.random.default_rng(seed)
    model = _lwr()
    q1, q2 = _random_q(model, rng), _random_q(model, rng)
    _, J1 = fk_and_jacobian(model, q1)
    J1 = J1[:, :6]  # square, full rank
    w = rng.normal(size=6)
    trip = np.abs(end_effector_force_estimate(J1, J1.T @ w) - w).max()
    _, J1 = fk_and_jacobian(model, q1)
    _, J2 = fk_and_jacobian(model, q2)
    w1, w2 = rng.normal(size=(2, 6))
    tau = virtual_force_translation(J1, J2, J1.T @ w1, J2.T @ w2)
    copy = max(np.abs(end_effector_force_estimate(J1, tau[:7]) - w2).max(),
               np.abs(end_effector_force_estimate(J2, tau[7:]) - w1).max())
    worst = max(trip, copy)
    return Check("Virtual-work round trip and wrench copy", worst <= tol,
                 f"round trip {trip:.2e}, copy fidelity {copy:.2e}")


def _rotation_check(seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        k = rng.normal(size=3)
        R = rotation_about_axis(k / np.linalg.norm(k), rng.uniform(0, np.pi))
        worst = max(worst, np.abs(R.T @ R - np.eye(3)).max(), abs(np.linalg.det(R) - 1))
    return Check("Rotations orthonormal", worst <= 1e-10, f"max deviation {worst:.2e}")


def run_all() -> list:
    return [check_jacobian(), check_penrose(), check_dynamics(), check_energy(), check_dmp(),
            check_virtual_work(), _rotation_check()]
