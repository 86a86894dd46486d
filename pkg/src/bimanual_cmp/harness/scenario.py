"""Demonstrate, learn stiffly, replay compliantly.

The three stages mirror how a CMP is obtained and used:

1. ``demonstrate`` turns the scripted task-space path into joint references
   for both arms with closed-loop inverse kinematics.
2. ``learn`` encodes those references as DMPs, executes them with very
   stiff joint impedance in the simulator and records the task torques
   (measured torque minus the robot's own model dynamics), which become
   the torque half of each CMP.
3. ``replay`` runs the CMPs at low stiffness with the selected controller
   variant while the scripted perturbation pushes one arm.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import dynamics as dyn
from ..clik import ClikConfig, ClikResult, solve_trajectory
from ..controllers import (ControllerVariant, GainSet, LowPassFilter, combined_feedforward,
                           end_effector_force_estimate, joint_impedance, perturbation_torques,
                           symmetric_task_torque, translate_wrenches)
from ..kinematics import fk_and_jacobian, fk_and_jacobian_from_frames
from ..primitives import Cmp, encode_dmp, encode_torques, extract_task_torques, integrate_dmp
from ..simulation import Plant, PerturbationProfile, SimState, measured_joint_torques, step
from ..task_space import (ABS_ANG, TaskReference, bimanual_jacobian, desired_velocities, task_coordinates,
                          task_errors)
from .config import ScenarioConfig, TrajectorySpec
from .logs import RunMetrics, format_table, log_columns, metrics_from_log

__all__ = [
    "Demonstration",
    "LearnResult",
    "RunResult",
    "LearningError",
    "absolute_path",
    "task_references",
    "demonstrate",
    "learn",
    "replay",
    "simulate",
    "compare_variants",
    "Comparison",
]


class LearningError(RuntimeError):
    """The stiff execution could not track the demonstration."""


def _minjerk(s):
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s ** 2), 30 * s ** 2 * (1 - s) ** 2


def absolute_path(spec: TrajectorySpec, t):
    """Offset of the absolute position from its start, and its rate, at times ``t``."""
    t = np.asarray(t, dtype=float)
    d = np.zeros((t.size, 3))
    v = np.zeros((t.size, 3))
    if spec.kind == "arc":
        # arc about ``arc_center`` (relative to the start point), min-jerk timed over the keyframe span
        t0, t1 = spec.keyframes[0, 0], spec.keyframes[-1, 0]
        s, ds = _minjerk((t - t0) / max(t1 - t0, 1e-12))
        k = spec.arc_axis / np.linalg.norm(spec.arc_axis)
        r0 = -spec.arc_center
        for i, (a, da) in enumerate(zip(spec.arc_angle * s, spec.arc_angle * ds / max(t1 - t0, 1e-12))):
            c, sn = np.cos(a), np.sin(a)
            r = r0 * c + np.cross(k, r0) * sn + k * (k @ r0) * (1 - c)
            d[i] = spec.arc_center + r
            v[i] = da * np.cross(k, r)
        return d, v
    kf = spec.keyframes
    for (ta, *pa), (tb, *pb) in zip(kf[:-1], kf[1:]):
        pa, pb = np.array(pa), np.array(pb)
        seg = (t >= ta) & (t <= tb) if tb == kf[-1, 0] else (t >= ta) & (t < tb)
        s = (t[seg] - ta) / (tb - ta)
        if spec.kind == "line":
            w, dw = s, np.ones_like(s)
        else:
            w, dw = _minjerk(s)
        d[seg] = pa + np.outer(w, pb - pa)
        v[seg] = np.outer(dw / (tb - ta), pb - pa)
    d[t > kf[-1, 0]] = kf[-1, 1:]
    d[t < kf[0, 0]] = kf[0, 1:]
    return d, v


def task_references(config: ScenarioConfig, coords0, t) -> list:
    """Absolute path from the start pose; relative pose held at the configured offset."""
    d, v = absolute_path(config.trajectory, t)
    R_abs = coords0.R_abs
    p_rel = R_abs.T @ config.trajectory.relative_offset
    zero = np.zeros(3)
    return [TaskReference(coords0.p_abs + d[k], R_abs, p_rel, coords0.R_rel, v[k], zero, zero, zero)
            for k in range(len(t))]


def _stack(values):
    return np.concatenate(values)


def _split(v, n):
    return v[:n], v[n:]


@dataclass
class Demonstration:
    t: np.ndarray
    refs: list
    q: np.ndarray
    qdot: np.ndarray
    clik: ClikResult


def demonstrate(config: ScenarioConfig) -> Demonstration:
    """Joint references for both arms realising the scripted task path."""
    models = config.robots
    q0 = _stack(config.posture)
    n = models[0].joint_count
    pose1, _ = fk_and_jacobian(models[0], q0[:n])
    pose2, _ = fk_and_jacobian(models[1], q0[n:])
    coords0 = task_coordinates(pose1, pose2)
    t = np.arange(config.ticks + 1) * config.dt
    refs = task_references(config, coords0, t)
    cfg = ClikConfig(K=config.clik_gain, K_s=config.clik_posture_gain, dt=config.dt,
                     tol_position=config.clik_tol, tol_rotation=config.clik_tol)
    q_demo = np.tile(q0, (t.size, 1)) if config.clik_posture_gain > 0 else None
    res = solve_trajectory(refs, q0, models, cfg, q_demo)
    return Demonstration(t, refs, res.q, res.qdot, res)


@dataclass
class Reference:
    """Joint-space reference for a run: positions, rates, accelerations and phase."""

    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    x: np.ndarray
    tau_rec: np.ndarray


def _rollout(cmps, dt, ticks) -> Reference:
    parts = [c.rollout(dt, ticks * dt) for c in cmps]
    r = [p[0] for p in parts]
    return Reference(np.hstack([a.y for a in r]), np.hstack([a.yd for a in r]),
                     np.hstack([a.ydd for a in r]), r[0].x, np.hstack([p[1] for p in parts]))


@dataclass
class RunResult:
    metrics: RunMetrics
    columns: list
    data: np.ndarray          # printed values, as floats
    text: np.ndarray          # printed values, as strings
    raw: dict                 # full-precision torque terms
    tau_f: np.ndarray | None  # task torques (learning runs)
    elapsed: float
    variant: ControllerVariant | None = None


def simulate(config: ScenarioConfig, ref: Reference, demo: Demonstration, gains: GainSet,
             variant: ControllerVariant, perturbation: PerturbationProfile | None,
             extra_ff: np.ndarray | None = None, seed: int | None = None,
             settle: float = 0.0) -> RunResult:
    """The 500 Hz loop: impedance control with the variant's feed-forward terms.

    ``extra_ff`` adds a per-tick joint torque (used by the iterative stiff
    learning run). With ``settle > 0`` the arms first hold the initial
    reference for that many seconds, unlogged, so the run starts from rest
    under load. Returns the formatted log and its metrics.
    """
    started = time.perf_counter()
    robots = config.robots
    n = robots[0].joint_count
    plant = Plant(robots, config.payloads, config.joint_friction)
    rng = np.random.default_rng(config.seed if seed is None else seed)
    N = ref.q.shape[0]
    dt = config.dt
    variant = ControllerVariant.parse(variant)
    filters = [LowPassFilter(config.filter_cutoff, dt) for _ in range(2)]
    target = perturbation.robot if perturbation is not None and perturbation.segments else 0
    has_pert = perturbation is not None and bool(perturbation.segments)
    zeros = np.zeros(2 * n)

    cols = log_columns(n)
    log = np.zeros((N, len(cols)))
    tau_f = np.zeros((N, 2 * n))
    raw = {k: np.zeros((N, 2 * n)) for k in ("rec", "biman", "vft", "ff")}
    state = SimState(0.0, [ref.q[0, :n].copy(), ref.q[0, n:].copy()], [np.zeros(n), np.zeros(n)])
    # filtered wrench estimates (J^+)^T dtau of each arm, dtau = expected - measured
    w_est = [np.zeros(6), np.zeros(6)]
    grav = plant.gravity
    rec_only = not (variant.uses_biman or variant.uses_vft)

    if settle > 0:
        ff0 = ref.tau_rec[0] + (extra_ff[0] if extra_ff is not None else 0.0)
        zero_qd = np.zeros(2 * n)
        for _ in range(int(round(settle / dt))):
            q, qd = _stack(state.q), _stack(state.qdot)
            f_dyn = config.fdyn_sign * _stack([dyn.inverse_dynamics(robots[i], state.q[i], state.qdot[i],
                                                                     np.zeros(n), grav) for i in range(2)])
            tau_u = joint_impedance(ref.q[0], q, zero_qd, qd, gains.K_q, gains.D_q, f_dyn, ff0)
            state = step(plant, state, _split(tau_u, n), None, dt)
        state = SimState(0.0, state.q, state.qdot)

    for k in range(N):
        q = _stack(state.q)
        qd = _stack(state.qdot)
        frames = [plant.terms(i, state.q[i])[0] for i in range(2)]
        (pose1, J1), (pose2, J2) = (fk_and_jacobian_from_frames(robots[i], frames[i]) for i in range(2))
        f_dyn = config.fdyn_sign * _stack([
            dyn.inverse_dynamics_from_frames(robots[i], frames[i], state.qdot[i], ref.qdd[k, i * n:(i + 1) * n], grav)
            for i in range(2)])
        coords = task_coordinates(pose1, pose2)
        J = bimanual_jacobian(J1, J2)
        e = task_errors(coords, demo.refs[k])

        tau_biman = zeros
        if variant.uses_biman:
            v = J @ qd
            v_d = desired_velocities(demo.refs[k], coords.R_abs, v[ABS_ANG])
            tau_biman = symmetric_task_torque(J, e, v_d - v, gains, demo.q[k], q)
        tau_vft = translate_wrenches(J1, J2, w_est[0], w_est[1]) if variant.uses_vft else zeros
        f_est = -w_est[target][:3]
        tau_ff = combined_feedforward(ref.tau_rec[k], tau_biman, tau_vft, variant, config.vft_sign)
        if extra_ff is not None:
            tau_ff = tau_ff + extra_ff[k]
        tau_u = joint_impedance(ref.q[k], q, ref.qd[k], qd, gains.K_q, gains.D_q, f_dyn, tau_ff)

        row = log[k]
        row[0] = k * dt
        row[1:1 + 2 * n] = q
        row[1 + 2 * n:1 + 4 * n] = qd
        row[1 + 4 * n:13 + 4 * n] = e
        row[13 + 4 * n:16 + 4 * n] = f_est
        row[16 + 4 * n] = np.linalg.norm(f_est)
        o = 17 + 4 * n
        for j, term in enumerate((ref.tau_rec[k], tau_biman, tau_vft, tau_ff)):
            row[o + j * 2 * n:o + (j + 1) * 2 * n] = term
        raw["rec"][k], raw["biman"][k], raw["vft"][k], raw["ff"][k] = ref.tau_rec[k], tau_biman, tau_vft, tau_ff
        if k == N - 1:
            break

        wrenches = perturbation.wrenches(k * dt, 2) if has_pert else [None, None]
        tau_arms = _split(tau_u, n)
        for i, Ji in enumerate((J1, J2)):
            tau_m = measured_joint_torques(tau_arms[i], Ji, wrenches[i], config.torque_noise, rng)
            tau_f[k, i * n:(i + 1) * n] = extract_task_torques(tau_m, f_dyn[i * n:(i + 1) * n])
            if not rec_only or has_pert:
                dtau = perturbation_torques(tau_arms[i], tau_m)
                w_est[i] = filters[i](end_effector_force_estimate(Ji, dtau))
        state = step(plant, state, tau_arms, perturbation if has_pert else None, dt)

    tau_f[-1] = tau_f[-2]
    text = format_table(log)
    data = text.astype(float)
    return RunResult(metrics_from_log(cols, data), cols, data, text, raw, tau_f,
                     time.perf_counter() - started, variant)


LEARN_SETTLE = 1.0


@dataclass
class LearnResult:
    cmps: tuple
    reference: Reference
    tau_f: np.ndarray
    tracking_error: float
    iterations: int
    history: list = field(default_factory=list)


def learn(config: ScenarioConfig, demo: Demonstration) -> LearnResult:
    """Encode the demonstration and record task torques from stiff execution.

    The stiff run is repeated with the previous run's task torques as
    feed-forward until the joint tracking error is within
    ``config.learn_tol`` (at most ``config.learn_iterations`` runs).
    """
    n = config.robots[0].joint_count
    dmps = [encode_dmp(demo.q[:, i * n:(i + 1) * n], config.dt, config.n_kernels, config.alpha_z,
                       config.alpha_x) for i in range(2)]
    rolls = [integrate_dmp(d, config.dt) for d in dmps]
    N = rolls[0].y.shape[0]
    ref = Reference(np.hstack([r.y for r in rolls]), np.hstack([r.yd for r in rolls]),
                    np.hstack([r.ydd for r in rolls]), rolls[0].x, np.zeros((N, 2 * n)))
    settle = LEARN_SETTLE
    ff = np.zeros((N, 2 * n))
    history = []
    for it in range(1, config.learn_iterations + 1):
        run = simulate(config, ref, demo, config.stiff_gains, ControllerVariant.REC_ONLY, None, extra_ff=ff,
                       settle=settle)
        err = float(np.max(np.abs(run.data[:, 1:1 + 2 * n] - ref.q)))
        history.append(err)
        ff = run.tau_f
        if err <= config.learn_tol:
            break
    else:
        raise LearningError(f"stiff execution tracking error {err:.3g} rad exceeds "
                            f"{config.learn_tol:.3g} rad after {config.learn_iterations} runs")
    cmps = tuple(Cmp(dmps[i], encode_torques(ff[:, i * n:(i + 1) * n], config.dt, dmps[i].tau,
                                             config.n_torque_kernels, config.alpha_x))
                 for i in range(2))
    return LearnResult(cmps, ref, ff, err, it, history)


def replay(config: ScenarioConfig, cmps, demo: Demonstration, variant=None,
           perturbation: PerturbationProfile | None = ...) -> RunResult:
    """Compliant execution of the learned CMPs; defaults come from ``config``."""
    variant = ControllerVariant.parse(variant if variant is not None else config.variant)
    perturbation = config.perturbation if perturbation is ... else perturbation
    ref = _rollout(cmps, config.dt, config.ticks)
    return simulate(config, ref, demo, config.gains, variant, perturbation)


ORDER = (ControllerVariant.REC_ONLY, ControllerVariant.REC_PLUS_BIMAN,
         ControllerVariant.REC_MINUS_VFT, ControllerVariant.ENTIRE)
RATIO_TARGET = 0.5
RATIO_BAND = 0.2


@dataclass
class Comparison:
    results: dict

    def metric(self, variant, name):
        return getattr(self.results[variant].metrics, name)

    def checks(self) -> list:
        """``(label, passed, detail)`` for each ordering the comparison must show."""
        R, B, V, E = ORDER
        rel = {v: self.metric(v, "rel_error_at_peak") for v in ORDER}
        comp = {v: self.metric(v, "compliance") for v in ORDER}
        ratio = rel[E] / rel[B] if rel[B] > 0 else float("inf")
        return [
            ("rel error: Entire < Rec+Biman", rel[E] < rel[B], f"{rel[E]:.4g} < {rel[B]:.4g}"),
            ("rel error: Rec+Biman < Rec-Vft", rel[B] < rel[V], f"{rel[B]:.4g} < {rel[V]:.4g}"),
            ("rel error: Rec-Vft <= RecOnly", rel[V] <= rel[R], f"{rel[V]:.4g} <= {rel[R]:.4g}"),
            ("rel error ratio Entire/Rec+Biman in 0.5 +- 0.2", abs(ratio - RATIO_TARGET) <= RATIO_BAND,
             f"{ratio:.3f}"),
            ("compliance: Rec-Vft > Entire", comp[V] > comp[E], f"{comp[V]:.4g} > {comp[E]:.4g} m/N"),
            ("compliance: Entire > Rec+Biman", comp[E] > comp[B], f"{comp[E]:.4g} > {comp[B]:.4g} m/N"),
        ]

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks())

    def table(self) -> str:
        head = "| quantity | " + " | ".join(v.value for v in ORDER) + " |"
        rows = [head, "|" + "---|" * (len(ORDER) + 1)]
        for label, name in (("absolute error at peak [m]", "abs_error_at_peak"),
                            ("relative error at peak [m]", "rel_error_at_peak"),
                            ("perturbation at peak [N]", "peak_perturbation"),
                            ("max absolute error [m]", "max_abs_error"),
                            ("compliance [m/N]", "compliance")):
            rows.append(f"| {label} | " + " | ".join(f"{self.metric(v, name):.4g}" for v in ORDER) + " |")
        return "\n".join(rows)


def _replay_job(args):
    config, cmps, demo, variant = args
    return replay(config, cmps, demo, variant)


def compare_variants(config: ScenarioConfig, cmps, demo: Demonstration, workers: int = 1) -> Comparison:
    """Run all four variants under the same perturbation."""
    jobs = [(config, cmps, demo, v) for v in ORDER]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_replay_job, jobs))
    else:
        results = [_replay_job(j) for j in jobs]
    return Comparison(dict(zip(ORDER, results)))
