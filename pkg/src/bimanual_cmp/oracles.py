"""Independent reference computations used to check the fast paths.

Nothing here shares code with :mod:`bimanual_cmp.kinematics` or
:mod:`bimanual_cmp.dynamics`: forward kinematics is an explicit product of
4x4 homogeneous matrices, and the dynamics follow the Lagrangian route
(mass matrix from link Jacobians, Christoffel symbols and gravity from
complex-step derivatives). Every function accepts complex joint angles so
that complex-step differentiation is exact to machine precision.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "dh_matrix",
    "chain_transforms",
    "tcp_transform",
    "lagrangian_mass_matrix",
    "potential_energy",
    "lagrangian_inverse_dynamics",
    "kinetic_energy",
]

_H = 1e-30


def dh_matrix(a, alpha, d, theta):
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0 * ct, sa + 0.0 * ct, ca + 0.0 * ct, d + 0.0 * ct],
        [0.0 * ct, 0.0 * ct, 0.0 * ct, 1.0 + 0.0 * ct],
    ])


def _effective_q(model, q):
    q = np.array(q, dtype=complex)
    for k, v in model.locked.items():
        q[k] = v
    return q


def chain_transforms(model, q):
    """World transforms ``T_0 .. T_n`` by explicit matrix multiplication."""
    q = _effective_q(model, q)
    T = model.base.as_matrix().astype(complex)
    out = [T]
    for (a, alpha, d, off), qi in zip(model.dh, q):
        T = T @ dh_matrix(a, alpha, d, qi + off)
        out.append(T)
    return out


def tcp_transform(model, q):
    return chain_transforms(model, q)[-1] @ model.tcp.as_matrix()


def _link_jacobians(model, Ts):
    n = model.joint_count
    Jv, Jw, coms, Rs = [], [], [], []
    for i, link in enumerate(model.inertials):
        T = Ts[i + 1]
        c = T[:3, :3] @ link.com + T[:3, 3]
        jv = np.zeros((3, n), dtype=complex)
        jw = np.zeros((3, n), dtype=complex)
        for j in range(i + 1):
            if j in model.locked:
                continue
            z = Ts[j][:3, 2]
            o = Ts[j][:3, 3]
            r = c - o
            jv[:, j] = [z[1] * r[2] - z[2] * r[1], z[2] * r[0] - z[0] * r[2], z[0] * r[1] - z[1] * r[0]]
            jw[:, j] = z
        Jv.append(jv)
        Jw.append(jw)
        coms.append(c)
        Rs.append(T[:3, :3])
    return Jv, Jw, coms, Rs


def lagrangian_mass_matrix(model, q):
    """``sum_i m_i Jv_i^T Jv_i + Jw_i^T R_i I_i R_i^T Jw_i`` plus armature."""
    Ts = chain_transforms(model, q)
    Jv, Jw, _, Rs = _link_jacobians(model, Ts)
    n = model.joint_count
    M = np.zeros((n, n), dtype=complex)
    for link, jv, jw, R in zip(model.inertials, Jv, Jw, Rs):
        Iw = R @ link.inertia @ R.T
        M += link.mass * jv.T @ jv + jw.T @ Iw @ jw
    M += np.diag(model.armature)
    return M


def potential_energy(model, q, gravity=(0.0, 0.0, -9.81)):
    Ts = chain_transforms(model, q)
    g = np.asarray(gravity, dtype=float)
    V = 0.0
    for i, link in enumerate(model.inertials):
        T = Ts[i + 1]
        c = T[:3, :3] @ link.com + T[:3, 3]
        V = V - link.mass * (g @ c)
    return V


def kinetic_energy(model, q, qdot):
    M = lagrangian_mass_matrix(model, q).real
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * qdot @ M @ qdot


def _complex_step(f, q, k):
    qc = np.array(q, dtype=complex)
    qc[k] += 1j * _H
    return np.imag(f(qc)) / _H


def lagrangian_inverse_dynamics(model, q, qdot, qddot, gravity=(0.0, 0.0, -9.81)):
    """``M qdd + sum_jk c_ijk qd_j qd_k + dV/dq`` with Christoffel symbols
    ``c_ijk = (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) / 2``."""
    q = np.asarray(q, dtype=float)
    qdot = np.array(qdot, dtype=float)
    qddot = np.array(qddot, dtype=float)
    for k in model.locked:
        qdot[k] = 0.0
        qddot[k] = 0.0
    n = model.joint_count
    M = lagrangian_mass_matrix(model, q).real
    dM = np.stack([_complex_step(lambda x: lagrangian_mass_matrix(model, x), q, k)
                   for k in range(n)], axis=2)  # dM[i, j, k] = dM_ij / dq_k
    c = 0.5 * (dM + dM.transpose(0, 2, 1) - dM.transpose(2, 0, 1))
    coriolis = np.einsum("ijk,j,k->i", c, qdot, qdot)
    grav = np.array([_complex_step(lambda x: potential_energy(model, x, gravity), q, k)
                     for k in range(n)])
    return M @ qddot + coriolis + grav
