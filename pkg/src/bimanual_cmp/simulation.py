"""Fixed-step simulation of two (or more) arms standing in for the real robots.

The plant integrates each arm with semi-implicit (symplectic) Euler:
first the velocity update, then the position update with the new
velocity. Because the mass matrix depends on the configuration, the
velocity update is carried out on the generalised momentum ``p = M(q) qd``;
for a constant mass matrix this is exactly ``qd += qdd dt; q += qd dt``,
and in general it keeps the energy error bounded instead of drifting.

External perturbations are wrenches at a TCP; the simulated joint torque
sensors report the commanded torque plus the joint-space image of that
wrench, optionally with Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from .kinematics import RobotModel, fk_and_jacobian, fk_and_jacobian_from_frames, link_frames

__all__ = [
    "PerturbationSegment",
    "PerturbationProfile",
    "SimState",
    "Plant",
    "SimulationError",
    "measured_joint_torques",
    "step",
]


class SimulationError(RuntimeError):
    """Raised when the state leaves the finite reals; carries the tick index."""

    def __init__(self, message, tick):
        super().__init__(f"{message} (tick {tick})")
        self.tick = tick


@dataclass(frozen=True)
class PerturbationSegment:
    """One piece of a piecewise wrench profile on ``[t0, t1)``.

    ``kind`` is ``zero``, ``ramp`` (0 -> wrench), ``hold``, ``release``
    (wrench -> 0) or ``sine`` (``wrench * sin(2 pi freq (t - t0))``).
    """

    kind: str
    t0: float
    t1: float
    wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))
    freq: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "ramp", "hold", "release", "sine"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.t1 <= self.t0:
            raise ValueError("segment must have t1 > t0")
        object.__setattr__(self, "wrench", np.asarray(self.wrench, dtype=float).reshape(6))

    def value(self, t: float) -> np.ndarray:
        s = (t - self.t0) / (self.t1 - self.t0)
        if self.kind == "zero":
            return np.zeros(6)
        if self.kind == "ramp":
            return s * self.wrench
        if self.kind == "hold":
            return self.wrench.copy()
        if self.kind == "release":
            return (1.0 - s) * self.wrench
        return np.sin(2.0 * np.pi * self.freq * (t - self.t0)) * self.wrench


@dataclass(frozen=True)
class PerturbationProfile:
    """Scripted TCP wrench on one robot (zero-based index ``robot``)."""

    robot: int = 0
    segments: tuple = ()
    cap: float = 100.0

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.t0))
        for a, b in zip(segs, segs[1:]):
            if b.t0 < a.t1 - 1e-12:
                raise ValueError("perturbation windows overlap")
        for s in segs:
            if np.linalg.norm(s.wrench[:3]) > self.cap or np.linalg.norm(s.wrench[3:]) > self.cap:
                raise ValueError(f"segment wrench exceeds cap of {self.cap}")
        object.__setattr__(self, "segments", segs)

    @property
    def windows(self):
        return [(s.t0, s.t1) for s in self.segments]

    def wrench(self, t: float) -> np.ndarray:
        for s in self.segments:
            if s.t0 <= t < s.t1:
                return s.value(t)
        return np.zeros(6)

    def wrenches(self, t: float, n_robots: int = 2):
        out = [np.zeros(6) for _ in range(n_robots)]
        out[self.robot] = self.wrench(t)
        return out

    @classmethod
    def push(cls, robot, t_start, force, ramp=1.0, hold=2.0, release=0.5, cap=100.0):
        """Ramp-hold-release push with force vector ``force`` (N)."""
        w = np.concatenate([np.asarray(force, dtype=float), np.zeros(3)])
        t1, t2, t3 = t_start + ramp, t_start + ramp + hold, t_start + ramp + hold + release
        return cls(robot, (PerturbationSegment("ramp", t_start, t1, w),
                           PerturbationSegment("hold", t1, t2, w),
                           PerturbationSegment("release", t2, t3, w)), cap)


@dataclass
class SimState:
    t: float
    q: list
    qdot: list
    tick: int = 0

    def copy(self) -> "SimState":
        return SimState(self.t, [q.copy() for q in self.q], [v.copy() for v in self.qdot], self.tick)


class Plant:
    """The simulated arms: kinematics, payload-augmented dynamics, friction.

    ``friction`` is viscous joint damping (Nms/rad), unknown to the
    controller's dynamics model.
    """

    def __init__(self, robots, payloads=None, friction: float = 0.1, gravity=dyn.GRAVITY):
        self.robots = tuple(robots)
        payloads = payloads or [None] * len(self.robots)
        self.payloads = tuple(payloads)
        self.models = tuple(dyn.with_payload(m, p) for m, p in zip(self.robots, self.payloads))
        self.friction = float(friction)
        self.gravity = np.asarray(gravity, dtype=float)
        self._cache = [None] * len(self.models)

    def terms(self, i, q):
        """``(frames, M, g)`` of arm ``i`` at ``q``; reuses the last evaluation."""
        key = q.tobytes()
        hit = self._cache[i]
        if hit is not None and hit[0] == key:
            return hit[1]
        model = self.models[i]
        frames = link_frames(model, q)
        M, g = dyn.mass_and_bias_from_frames(model, frames, np.zeros(model.joint_count), self.gravity)
        out = (frames, M, g)
        self._cache[i] = (key, out)
        return out

    def accelerations(self, i, q, qdot, tau, wrench=None, frames=None, J=None):
        model = self.models[i]
        frames = frames if frames is not None else link_frames(model, q)
        M, bias = dyn.mass_and_bias_from_frames(model, frames, qdot, self.gravity)
        rhs = tau - bias - self.friction * qdot
        if wrench is not None and np.any(wrench):
            if J is None:
                _, J = fk_and_jacobian(model, q)
            rhs = rhs + J.T @ wrench
        return dyn.solve_free(model, M, rhs)


def measured_joint_torques(commanded, J, external_wrench=None, noise_std: float = 0.0, rng=None):
    """Emulated joint torque sensor: ``commanded + J^T w`` plus optional noise."""
    tau = np.array(commanded, dtype=float)
    if external_wrench is not None:
        tau = tau + J.T @ np.asarray(external_wrench, dtype=float)
    if noise_std > 0.0:
        rng = rng if rng is not None else np.random.default_rng()
        tau = tau + rng.normal(0.0, noise_std, size=tau.shape)
    return tau


FIXED_POINT_PASSES = 2


def _advance(plant: Plant, i, q, qd, tau, wrench, dt):
    model = plant.models[i]
    frames, M, g = plant.terms(i, q)
    force = tau - g
    if wrench is not None and np.any(wrench):
        force = force + fk_and_jacobian_from_frames(model, frames)[1].T @ wrench
    p = M @ qd
    v = qd
    # The momentum update is implicit in the new velocity through the
    # kinetic-energy gradient and friction; a couple of fixed-point passes
    # converge far below the step's own truncation error.
    for _ in range(FIXED_POINT_PASSES):
        p_new = p + dt * (force + dyn.kinetic_energy_gradient(model, q, v, frames) - plant.friction * v)
        v = dyn.solve_free(model, M, p_new)
    q_new = model.apply_locks(q + dt * v) if model.locked else q + dt * v
    if not np.all(np.isfinite(q_new)):
        return q_new, v
    _, M_new, _ = plant.terms(i, q_new)
    return q_new, dyn.solve_free(model, M_new, p_new)


def step(plant: Plant, state: SimState, commanded, perturbation: PerturbationProfile | None,
         dt: float, joint_torques=None) -> SimState:
    """Advance all arms by ``dt`` with semi-implicit Euler.

    Args:
        commanded: per-robot commanded joint torques.
        perturbation: TCP wrench profile evaluated at ``state.t``.
        joint_torques: optional per-robot torques injected directly at the joints.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_rob = len(plant.models)
    wrenches = perturbation.wrenches(state.t, n_rob) if perturbation is not None else [None] * n_rob
    new = SimState(state.t + dt, [], [], state.tick + 1)
    for i, model in enumerate(plant.models):
        q, qd = state.q[i], state.qdot[i]
        tau = np.asarray(commanded[i], dtype=float)
        if joint_torques is not None:
            tau = tau + joint_torques[i]
        if not np.all(np.isfinite(tau)):
            raise SimulationError(f"non-finite torque on robot {i + 1}", state.tick)
        try:
            q_new, qd_new = _advance(plant, i, np.asarray(q, dtype=float), qd, tau, wrenches[i], dt)
        except (ValueError, dyn.DynamicsError) as exc:
            raise SimulationError(f"robot {i + 1} diverged: {exc}", state.tick) from exc
        if not (np.all(np.isfinite(q_new)) and np.all(np.isfinite(qd_new))):
            raise SimulationError(f"non-finite state on robot {i + 1}", state.tick)
        new.q.append(q_new)
        new.qdot.append(qd_new)
    return new
