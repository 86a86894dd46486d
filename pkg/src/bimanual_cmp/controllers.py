"""Torque-level control laws.

Every law here is a pure function of its inputs. The only stateful piece
is :class:`LowPassFilter`, which the simulation loop owns and uses to
smooth each arm's estimated perturbation wrench before it is translated
to the other arm.

Sign conventions are taken literally: the impedance law adds the model
dynamics (``+ f_dynamic``) and the combined feed-forward subtracts the
translated torque (``- tau_vft``). The perturbation torque is
``expected - measured``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np

from .kinematics import robust_pseudo_inverse

__all__ = [
    "GainSet",
    "ControllerVariant",
    "LowPassFilter",
    "joint_impedance",
    "symmetric_task_torque",
    "end_effector_force_estimate",
    "perturbation_torques",
    "virtual_force_translation",
    "translate_wrenches",
    "combined_feedforward",
]


def _diag(v, name):
    v = np.array(v, dtype=float).reshape(-1)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite and non-negative")
    return v


@dataclass(frozen=True)
class GainSet:
    """Diagonal gains; joint-space vectors cover both arms (length ``2n``).

    ``K_task``/``D_task`` follow the 12-entry task ordering
    ``[abs lin, abs ang, rel lin, rel ang]``.
    """

    K_q: np.ndarray
    D_q: np.ndarray
    K_task: np.ndarray
    D_task: np.ndarray
    K_s1: np.ndarray

    def __post_init__(self):
        for name in ("K_q", "D_q", "K_task", "D_task", "K_s1"):
            object.__setattr__(self, name, _diag(getattr(self, name), name))
        if self.K_task.size != 12 or self.D_task.size != 12:
            raise ValueError("task gains need 12 entries")
        if not (self.K_q.size == self.D_q.size == self.K_s1.size):
            raise ValueError("joint gain vectors differ in length")

    @classmethod
    def zeros(cls, n_total: int) -> "GainSet":
        z = np.zeros(n_total)
        return cls(z, z, np.zeros(12), np.zeros(12), z)

    @staticmethod
    def critical_task_damping(K_task) -> np.ndarray:
        """Elementwise ``2 sqrt(K)``, the unit-mass critical-damping heuristic."""
        return 2.0 * np.sqrt(_diag(K_task, "K_task"))

    def split(self, n: int):
        """Per-arm ``(K_q, D_q)`` slices for arm 0 and arm 1."""
        return [(self.K_q[i * n:(i + 1) * n], self.D_q[i * n:(i + 1) * n]) for i in range(2)]


class ControllerVariant(enum.Enum):
    """Which feed-forward terms are active."""

    REC_ONLY = "RecOnly"
    REC_PLUS_BIMAN = "RecPlusBiman"
    REC_MINUS_VFT = "RecMinusVft"
    ENTIRE = "Entire"

    @property
    def uses_biman(self) -> bool:
        return self in (ControllerVariant.REC_PLUS_BIMAN, ControllerVariant.ENTIRE)

    @property
    def uses_vft(self) -> bool:
        return self in (ControllerVariant.REC_MINUS_VFT, ControllerVariant.ENTIRE)

    @classmethod
    def parse(cls, text) -> "ControllerVariant":
        """Accepts ``RecOnly``, ``rec_only``, ``Rec+Biman``, ``rec-vft``, ``entire`` ..."""
        if isinstance(text, cls):
            return text
        key = re.sub(r"[\s_\-]", "", str(text).lower()).replace("+", "plus").replace("−", "minus")
        key = key.replace("only", "") if key != "reconly" else key
        table = {
            "reconly": cls.REC_ONLY, "rec": cls.REC_ONLY,
            "recplusbiman": cls.REC_PLUS_BIMAN, "recbiman": cls.REC_PLUS_BIMAN,
            "recminusvft": cls.REC_MINUS_VFT, "recvft": cls.REC_MINUS_VFT,
            "entire": cls.ENTIRE, "full": cls.ENTIRE,
        }
        if key not in table:
            raise ValueError(f"unknown controller variant {text!r}; "
                             f"choose from {', '.join(v.value for v in cls)}")
        return table[key]

    def __str__(self):
        return self.value


class LowPassFilter:
    """First-order low-pass ``y += a (u - y)`` with ``a = dt / (dt + 1/(2 pi fc))``.

    The first sample initialises the state, so a constant input passes
    through unchanged.
    """

    def __init__(self, cutoff_hz: float, dt: float):
        if cutoff_hz <= 0 or dt <= 0:
            raise ValueError("cutoff and dt must be positive")
        self.alpha = dt / (dt + 1.0 / (2.0 * np.pi * cutoff_hz))
        self.state = None

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.state is None:
            self.state = u.copy()
        else:
            self.state = self.state + self.alpha * (u - self.state)
        return self.state.copy()

    def reset(self):
        self.state = None


def joint_impedance(q_d, q, qdot_d, qdot, K_q, D_q, f_dynamic, tau_ff) -> np.ndarray:
    """``tau_u = K_q (q_d - q) + D_q (qd_d - qd) + f_dynamic + tau_ff``.

    ``K_q``/``D_q`` are diagonals (vectors) or scalars.
    """
    q_d, q = np.asarray(q_d, dtype=float), np.asarray(q, dtype=float)
    if q_d.shape != q.shape:
        raise ValueError("q_d and q differ in shape")
    return (np.asarray(K_q) * (q_d - q) + np.asarray(D_q) * (np.asarray(qdot_d) - np.asarray(qdot))
            + np.asarray(f_dynamic, dtype=float) + np.asarray(tau_ff, dtype=float))


def symmetric_task_torque(J, x_err, xdot_err, gains: GainSet, q_demo=None, q_act=None,
                          J_pinv=None) -> np.ndarray:
    """``J^T (K_task e + D_task de) + (I - J^T J_pinv^T) K_s1 K_q (q_demo - q_act)``.

    The posture term lives in the null space of the task, so it vanishes
    when the task uses up every free joint. ``J_pinv`` may be passed to
    reuse a pseudo-inverse computed elsewhere in the same tick.
    """
    J = np.asarray(J, dtype=float)
    x_err = np.asarray(x_err, dtype=float)
    xdot_err = np.asarray(xdot_err, dtype=float)
    if J.shape[0] != 12 or x_err.shape != (12,) or xdot_err.shape != (12,):
        raise ValueError("task quantities must have 12 rows")
    tau = J.T @ (gains.K_task * x_err + gains.D_task * xdot_err)
    if q_demo is None or not np.any(gains.K_s1):
        return tau
    if J_pinv is None:
        J_pinv, _ = robust_pseudo_inverse(J)
    posture = gains.K_s1 * gains.K_q * (np.asarray(q_demo, dtype=float) - np.asarray(q_act, dtype=float))
    return tau + posture - J.T @ (J_pinv.T @ posture)


def end_effector_force_estimate(J, tau, return_flag: bool = False):
    """Wrench ``(J^+)^T tau`` consistent with joint torques ``tau`` by virtual work.

    Near a singularity the pseudo-inverse is damped; ``return_flag=True``
    returns ``(wrench, damped)`` so callers can see when that happened.
    """
    J = np.asarray(J, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (J.shape[1],):
        raise ValueError(f"tau has shape {tau.shape}, J has {J.shape[1]} columns")
    pinv, damped = robust_pseudo_inverse(J)
    f = pinv.T @ tau
    return (f, damped) if return_flag else f


def perturbation_torques(tau_expected, tau_measured) -> np.ndarray:
    """``expected - measured``: the torque residual attributed to an external push."""
    a, b = np.asarray(tau_expected, dtype=float), np.asarray(tau_measured, dtype=float)
    if a.shape != b.shape:
        raise ValueError("expected and measured torques differ in shape")
    return a - b


def virtual_force_translation(J1, J2, delta_tau1, delta_tau2, return_flag: bool = False):
    """Copy each arm's estimated perturbation wrench onto the other arm.

    Returns ``[J1^T (J2^+)^T dtau2 ; J2^T (J1^+)^T dtau1]``: a push felt on
    arm 2 becomes joint torques on arm 1 that realise the same wrench.
    """
    w2, d2 = end_effector_force_estimate(J2, delta_tau2, return_flag=True)
    w1, d1 = end_effector_force_estimate(J1, delta_tau1, return_flag=True)
    tau = translate_wrenches(J1, J2, w1, w2)
    return (tau, d1 or d2) if return_flag else tau


def translate_wrenches(J1, J2, w1, w2) -> np.ndarray:
    """``[J1^T w2 ; J2^T w1]``: the second half of the translation, for wrenches
    that were already estimated (and possibly filtered) elsewhere."""
    return np.concatenate([np.asarray(J1, dtype=float).T @ np.asarray(w2, dtype=float),
                           np.asarray(J2, dtype=float).T @ np.asarray(w1, dtype=float)])


def combined_feedforward(tau_rec, tau_biman, tau_vft, variant: ControllerVariant,
                         vft_sign: float = -1.0) -> np.ndarray:
    """``tau_rec + tau_biman - tau_vft`` with the terms the variant omits set to zero.

    ``vft_sign`` exists for sign audits; leave it at ``-1``.
    """
    variant = ControllerVariant.parse(variant)
    tau = np.array(tau_rec, dtype=float)
    if variant.uses_biman:
        tau = tau + np.asarray(tau_biman, dtype=float)
    if variant.uses_vft:
        tau = tau + vft_sign * np.asarray(tau_vft, dtype=float)
    return tau
