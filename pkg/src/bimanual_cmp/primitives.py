"""Compliant Movement Primitives: a joint-space DMP paired with a torque profile.

Both halves are driven by the same exponentially decaying phase
``x = exp(-alpha_x t / tau)``. The motion half is the standard discrete
DMP

    tau z' = alpha_z (beta_z (g - y) - z) + f(x),   tau y' = z,
    f(x) = x s sum(w psi(x)) / sum(psi(x)),

with ``s = g - y0`` per joint (1 for joints whose start and goal
coincide, so that out-and-back motions can still be encoded). The torque
half is the plain normalised RBF mixture ``sum(w psi(x)) / sum(psi(x))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Dmp",
    "TorqueProfile",
    "Cmp",
    "DmpRollout",
    "phase",
    "kernel_centers",
    "encode_dmp",
    "integrate_dmp",
    "encode_torques",
    "evaluate_torques",
    "extract_task_torques",
]

KERNEL_OVERLAP = 0.7
SCALE_THRESHOLD = 1e-3


def phase(t, tau: float, alpha_x: float = 2.0):
    """Canonical phase ``exp(-alpha_x t / tau)``; 1 at ``t = 0``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return np.exp(-alpha_x * np.asarray(t, dtype=float) / tau)


def kernel_centers(n: int, alpha_x: float):
    """Centres evenly spread in time over ``[0, tau]`` and widths chosen so that
    neighbouring kernels cross at ``KERNEL_OVERLAP`` activation."""
    if n < 2:
        raise ValueError("at least two kernels are needed")
    c = np.exp(-alpha_x * np.linspace(0.0, 1.0, n))
    gaps = np.abs(np.diff(c))
    gaps = np.append(gaps, gaps[-1])
    h = -4.0 * np.log(KERNEL_OVERLAP) / gaps ** 2
    return c, h


def _basis(x, c, h):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = np.exp(-h[None, :] * (x[:, None] - c[None, :]) ** 2)
    return psi / np.maximum(psi.sum(axis=1, keepdims=True), 1e-300)


@dataclass(frozen=True)
class Dmp:
    """Multi-joint discrete DMP; ``weights`` is ``(dof, N)``."""

    weights: np.ndarray
    goal: np.ndarray
    y0: np.ndarray
    tau: float
    centers: np.ndarray
    widths: np.ndarray
    scale: np.ndarray
    alpha_z: float = 48.0
    beta_z: float = 12.0
    alpha_x: float = 2.0
    yd0: np.ndarray | None = None

    def __post_init__(self):
        if self.yd0 is None:
            object.__setattr__(self, "yd0", np.zeros_like(self.goal))
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.centers.size < 2 or np.any(np.diff(self.centers) >= 0):
            raise ValueError("kernel centres must be at least two and strictly decreasing")

    @property
    def dof(self) -> int:
        return self.goal.size

    @property
    def n_kernels(self) -> int:
        return self.centers.size

    def forcing(self, x) -> np.ndarray:
        """``f(x)`` for every joint; shape ``(len(x), dof)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (_basis(x, self.centers, self.widths) @ self.weights.T) * (x[:, None] * self.scale[None, :])


@dataclass(frozen=True)
class TorqueProfile:
    """Per-joint normalised RBF mixture over the shared phase; ``weights`` is ``(dof, N_tau)``."""

    weights: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    tau: float
    alpha_x: float = 2.0

    @property
    def n_kernels(self) -> int:
        return self.centers.size


@dataclass
class DmpRollout:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yd: np.ndarray
    ydd: np.ndarray


def _check_samples(samples, n_min):
    Y = np.asarray(samples, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] < n_min:
        raise ValueError(f"need at least {n_min} samples, got {Y.shape[0]}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("samples contain non-finite values")
    return Y


def encode_dmp(samples, dt: float, n_kernels: int = 25, alpha_z: float = 48.0,
               alpha_x: float = 2.0) -> Dmp:
    """Fit a DMP to uniformly sampled joint positions ``(T, dof)``.

    Velocities and accelerations come from central differences; the
    forcing weights are the least-squares solution over all samples.
    """
    Y = _check_samples(samples, 2 * n_kernels)
    if dt <= 0:
        raise ValueError("dt must be positive")
    T = Y.shape[0]
    tau = (T - 1) * dt
    beta_z = alpha_z / 4.0
    Yd = np.gradient(Y, dt, axis=0)
    Ydd = np.gradient(Yd, dt, axis=0)
    y0, g = Y[0].copy(), Y[-1].copy()
    span = g - y0
    scale = np.where(np.abs(span) >= SCALE_THRESHOLD, span, 1.0)
    x = phase(np.arange(T) * dt, tau, alpha_x)
    c, h = kernel_centers(n_kernels, alpha_x)
    f_target = tau ** 2 * Ydd - alpha_z * (beta_z * (g - Y) - tau * Yd)
    A = _basis(x, c, h) * x[:, None]
    W, *_ = np.linalg.lstsq(A, f_target / scale, rcond=None)
    return Dmp(W.T.copy(), g, y0, tau, c, h, scale, alpha_z, beta_z, alpha_x, Yd[0].copy())


def integrate_dmp(dmp: Dmp, dt: float, duration: float | None = None) -> DmpRollout:
    """Explicit-Euler rollout from ``y0`` with the demonstrated start velocity;
    ``duration`` defaults to ``tau``.

    The returned grid has ``round(duration / dt) + 1`` samples, ``t_k = k dt``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    duration = dmp.tau if duration is None else duration
    n = int(round(duration / dt)) + 1
    t = np.arange(n) * dt
    x = phase(t, dmp.tau, dmp.alpha_x)
    f = dmp.forcing(x)
    Y = np.empty((n, dmp.dof))
    Yd = np.empty_like(Y)
    Ydd = np.empty_like(Y)
    y = dmp.y0.astype(float).copy()
    z = dmp.tau * dmp.yd0
    for k in range(n):
        zd = (dmp.alpha_z * (dmp.beta_z * (dmp.goal - y) - z) + f[k]) / dmp.tau
        Y[k], Yd[k], Ydd[k] = y, z / dmp.tau, zd / dmp.tau
        y = y + dt * z / dmp.tau
        z = z + dt * zd
    return DmpRollout(t, x, Y, Yd, Ydd)


def encode_torques(samples, dt: float, tau: float | None = None, n_kernels: int = 40,
                   alpha_x: float = 2.0) -> TorqueProfile:
    """Least-squares RBF fit of torques ``(T, dof)`` sampled at ``t_k = k dt``."""
    Tq = _check_samples(samples, n_kernels)
    T = Tq.shape[0]
    tau = (T - 1) * dt if tau is None else tau
    x = phase(np.arange(T) * dt, tau, alpha_x)
    c, h = kernel_centers(n_kernels, alpha_x)
    W, *_ = np.linalg.lstsq(_basis(x, c, h), Tq, rcond=None)
    return TorqueProfile(W.T.copy(), c, h, tau, alpha_x)


def evaluate_torques(profile: TorqueProfile, x) -> np.ndarray:
    """Torques at phase ``x``: ``(dof,)`` for a scalar, ``(len(x), dof)`` otherwise.

    Phases at or below zero are clamped to the smallest kernel centre.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x = np.where(x <= 0.0, profile.centers.min(), x)
    out = _basis(x, profile.centers, profile.widths) @ profile.weights.T
    return out[0] if scalar else out


def extract_task_torques(tau_measured, f_dynamic) -> np.ndarray:
    """Task-specific torque ``tau_m - f_dynamic``: what the robot's own model does not explain."""
    a, b = np.asarray(tau_measured, dtype=float), np.asarray(f_dynamic, dtype=float)
    if a.shape != b.shape:
        raise ValueError("measured torques and dynamics differ in shape")
    return a - b


def _arr(v):
    return np.asarray(v, dtype=float)


@dataclass(frozen=True)
class Cmp:
    """Joint trajectory (as a DMP) plus task torque profile on one phase."""

    dmp: Dmp
    torque: TorqueProfile

    def __post_init__(self):
        if not (np.isclose(self.dmp.tau, self.torque.tau) and self.dmp.alpha_x == self.torque.alpha_x):
            raise ValueError("motion and torque halves must share duration and phase decay")
        if self.dmp.dof != self.torque.weights.shape[0]:
            raise ValueError("motion and torque halves have different joint counts")

    @classmethod
    def learn(cls, q, tau_f, dt: float, n_kernels: int = 25, n_torque_kernels: int = 40,
              alpha_z: float = 48.0, alpha_x: float = 2.0) -> "Cmp":
        dmp = encode_dmp(q, dt, n_kernels, alpha_z, alpha_x)
        return cls(dmp, encode_torques(tau_f, dt, dmp.tau, n_torque_kernels, alpha_x))

    def phase(self, t):
        return phase(t, self.dmp.tau, self.dmp.alpha_x)

    def rollout(self, dt: float, duration: float | None = None):
        """``(DmpRollout, tau_rec)`` on one time grid; both use the same phase array."""
        r = integrate_dmp(self.dmp, dt, duration)
        return r, evaluate_torques(self.torque, r.x)

    def to_dict(self) -> dict:
        d, p = self.dmp, self.torque
        return {
            "format": "cmp/1",
            "tau": d.tau,
            "alpha_x": d.alpha_x,
            "dmp": {"alpha_z": d.alpha_z, "beta_z": d.beta_z, "goal": d.goal.tolist(),
                    "y0": d.y0.tolist(), "yd0": d.yd0.tolist(), "scale": d.scale.tolist(), "centers": d.centers.tolist(),
                    "widths": d.widths.tolist(), "weights": d.weights.tolist()},
            "torque": {"centers": p.centers.tolist(), "widths": p.widths.tolist(),
                       "weights": p.weights.tolist()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Cmp":
        if data.get("format") != "cmp/1":
            raise ValueError("not a serialized CMP")
        m, t = data["dmp"], data["torque"]
        dmp = Dmp(_arr(m["weights"]), _arr(m["goal"]), _arr(m["y0"]), float(data["tau"]),
                  _arr(m["centers"]), _arr(m["widths"]), _arr(m["scale"]),
                  float(m["alpha_z"]), float(m["beta_z"]), float(data["alpha_x"]),
                  _arr(m.get("yd0", np.zeros(len(m["goal"])))))
        prof = TorqueProfile(_arr(t["weights"]), _arr(t["centers"]), _arr(t["widths"]),
                             float(data["tau"]), float(data["alpha_x"]))
        return cls(dmp, prof)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Cmp":
        return cls.from_dict(json.loads(Path(path).read_text()))
