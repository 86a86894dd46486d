"""Closed-loop inverse kinematics for the two-arm task.

``clik_step`` maps a desired task velocity plus error feedback to joint
velocities, optionally with a posture objective projected into the null
space of the task. ``solve_trajectory`` integrates it over a sampled task
reference with explicit Euler to produce joint reference trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import damped_pseudo_inverse, fk_and_jacobian, robust_pseudo_inverse
from .task_space import (ABS_ANG, ABS_LIN, REL_ANG, REL_LIN, bimanual_jacobian, desired_velocities,
                         task_coordinates, task_errors)

__all__ = [
    "ClikConfig",
    "ClikResult",
    "ClikConvergenceError",
    "SingularConfigurationError",
    "clik_step",
    "solve_trajectory",
    "task_state",
]

SINGULAR_RCOND = 1e-10
INITIAL_ITERATIONS = 5000


class SingularConfigurationError(RuntimeError):
    """The task Jacobian lost rank and no damping was allowed."""


class ClikConvergenceError(RuntimeError):
    """A sample could not be brought within tolerance; ``index`` is the worst one."""

    def __init__(self, message, index, error):
        super().__init__(f"{message} (sample {index}, error {error:.3g})")
        self.index = index
        self.error = error


@dataclass(frozen=True)
class ClikConfig:
    """Gains and numerics.

    ``K`` is the 12-entry task gain diagonal (1/s), ``K_s`` the joint-space
    posture gain diagonal (scalar or ``2n`` entries). ``lam=None`` switches
    damping on automatically near singularities; ``lam=0`` means plain
    pseudo-inverse and raises on a singular Jacobian.
    """

    K: np.ndarray = field(default_factory=lambda: np.full(12, 10.0))
    K_s: np.ndarray | float = 0.0
    lam: float | None = None
    dt: float = 0.002
    max_iterations: int = 200
    tol_position: float = 1e-4
    tol_rotation: float = 1e-4

    def __post_init__(self):
        K = np.array(self.K, dtype=float).reshape(-1)
        if K.size == 1:
            K = np.full(12, K[0])
        if K.size != 12 or np.any(K < 0):
            raise ValueError("K must be 12 non-negative gains")
        object.__setattr__(self, "K", K)
        K_s = np.array(self.K_s, dtype=float)
        if np.any(K_s < 0):
            raise ValueError("K_s must be non-negative")
        object.__setattr__(self, "K_s", K_s)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be non-negative")


@dataclass
class ClikResult:
    t: np.ndarray
    q: np.ndarray       # (samples, 2n)
    qdot: np.ndarray    # (samples, 2n)
    error: np.ndarray   # per-sample max of (position error, rotation error)
    initial_iterations: int


def _pinv(J, cfg: ClikConfig):
    if cfg.lam is None:
        return robust_pseudo_inverse(J)[0]
    if cfg.lam == 0.0:
        s = np.linalg.svd(J, compute_uv=False)
        if s.min() <= SINGULAR_RCOND * max(s.max(), 1.0):
            raise SingularConfigurationError(f"task Jacobian is singular (sigma_min = {s.min():.3g})")
        return np.linalg.pinv(J)
    return damped_pseudo_inverse(J, cfg.lam)


def clik_step(J, v_d, e, q_demo, q_act, cfg: ClikConfig) -> np.ndarray:
    """``qd = J^+ (v_d + K e) + (I - J^+ J) K_s (q_demo - q_act)``."""
    J = np.asarray(J, dtype=float)
    v_d, e = np.asarray(v_d, dtype=float), np.asarray(e, dtype=float)
    if J.shape[0] != v_d.size or v_d.shape != e.shape:
        raise ValueError("task dimensions disagree")
    Jp = _pinv(J, cfg)
    qdot = Jp @ (v_d + cfg.K * e)
    if np.any(cfg.K_s):
        posture = cfg.K_s * (np.asarray(q_demo, dtype=float) - np.asarray(q_act, dtype=float))
        qdot = qdot + posture - Jp @ (J @ posture)
    return qdot


def task_state(models, q):
    """Task coordinates and stacked Jacobian of both arms at stacked ``q``."""
    n = models[0].joint_count
    pose1, J1 = fk_and_jacobian(models[0], q[:n])
    pose2, J2 = fk_and_jacobian(models[1], q[n:])
    return task_coordinates(pose1, pose2), bimanual_jacobian(J1, J2)


def _error_size(e):
    lin = max(np.linalg.norm(e[ABS_LIN]), np.linalg.norm(e[REL_LIN]))
    ang = max(np.linalg.norm(e[ABS_ANG]), np.linalg.norm(e[REL_ANG]))
    return lin, ang


def _within(e, cfg):
    lin, ang = _error_size(e)
    return lin <= cfg.tol_position and ang <= cfg.tol_rotation


def _freeze(models, qdot):
    n = models[0].joint_count
    for i, m in enumerate(models):
        if m.locked:
            qdot[[i * n + k for k in m.locked]] = 0.0
    return qdot


def solve_trajectory(refs, q0, models, cfg: ClikConfig, q_demo=None) -> ClikResult:
    """Joint reference realising the sampled task references ``refs``.

    Before the first sample the configuration is pulled onto ``refs[0]``
    with up to 5000 feedback-only iterations. Each later sample is reached
    by one feed-forward Euler step, followed by feedback-only correction
    iterations if it is still outside tolerance.

    Args:
        refs: sequence of :class:`TaskReference`, one per ``cfg.dt``.
        q0: stacked start configuration of both arms.
        models: the two robot models.
        q_demo: optional ``(samples, 2n)`` posture to track in the null space.
    """
    n_s = len(refs)
    q = np.array(q0, dtype=float)
    n = models[0].joint_count
    for i, m in enumerate(models):
        q[i * n:(i + 1) * n] = m.apply_locks(q[i * n:(i + 1) * n])
    zeros = np.zeros(12)
    demo = (lambda k, q: q_demo[k]) if q_demo is not None else (lambda k, q: q)

    def correct(k, q, budget):
        for it in range(budget):
            coords, J = task_state(models, q)
            e = task_errors(coords, refs[k])
            if _within(e, cfg):
                return q, e, it
            q = q + cfg.dt * _freeze(models, clik_step(J, zeros, e, demo(k, q), q, cfg))
        coords, _ = task_state(models, q)
        return q, task_errors(coords, refs[k]), budget

    q, e, used = correct(0, q, INITIAL_ITERATIONS)
    if not _within(e, cfg):
        raise ClikConvergenceError("initial configuration did not converge", 0, max(_error_size(e)))

    Q = np.empty((n_s, q.size))
    QD = np.empty((n_s, q.size))
    err = np.empty(n_s)
    worst = (0, 0.0)
    for k in range(n_s):
        coords, J = task_state(models, q)
        e = task_errors(coords, refs[k])
        if not _within(e, cfg):
            q, e, _ = correct(k, q, cfg.max_iterations)
            coords, J = task_state(models, q)
            size = max(_error_size(e))
            if not _within(e, cfg) and size > worst[1]:
                worst = (k, size)
        err[k] = max(_error_size(e))
        v_d = desired_velocities(refs[k], coords.R_abs, refs[k].w_absd)
        qdot = _freeze(models, clik_step(J, v_d, e, demo(k, q), q, cfg))
        Q[k] = q
        QD[k] = qdot
        q = q + cfg.dt * qdot
    if worst[1] > 0.0:
        raise ClikConvergenceError("reference not tracked within tolerance", *worst)
    return ClikResult(np.arange(n_s) * cfg.dt, Q, QD, err, used)
