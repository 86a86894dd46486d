import numpy as np
import pytest

from bimanual_cmp import dynamics as dyn
from bimanual_cmp.harness.validation import energy_drift
from bimanual_cmp.kinematics import fk_and_jacobian, planar_arm
from bimanual_cmp.simulation import (PerturbationProfile, PerturbationSegment, Plant, SimState, SimulationError,
                                     measured_joint_torques, step)

from conftest import random_q

DT = 0.002


def _run(plant, q0, qd0, duration, dt, torques=None):
    state = SimState(0.0, [np.array(q, dtype=float) for q in q0], [np.array(v, dtype=float) for v in qd0])
    zero = [np.zeros_like(q) for q in state.q] if torques is None else torques
    for _ in range(int(round(duration / dt))):
        state = step(plant, state, zero, None, dt)
    return state


def test_zero_dynamics_leaves_state_unchanged(lwr, rng):
    q = random_q(lwr, rng)
    plant = Plant([lwr], gravity=np.zeros(3))
    s = _run(plant, [q], [np.zeros(7)], 0.1, DT)
    np.testing.assert_array_equal(s.q[0], q)
    np.testing.assert_array_equal(s.qdot[0], 0.0)
    assert s.tick == 50 and s.t == pytest.approx(0.1)


def test_energy_conservation():
    assert energy_drift(duration=10.0, dt=DT) <= 5e-3


def test_passivity_with_joint_damping(lwr, rng):
    plant = Plant([lwr], friction=0.5)
    q = random_q(lwr, rng)
    state = SimState(0.0, [q], [rng.normal(size=7)])
    model = plant.models[0]

    def energy(s):
        return dyn.kinetic_energy(model, s.q[0], s.qdot[0]) + dyn.potential_energy(model, s.q[0])

    energies = [energy(state)]
    for _ in range(1000):
        state = step(plant, state, [np.zeros(7)], None, DT)
        energies.append(energy(state))
    energies = np.array(energies)
    # the symplectic step's bounded energy wobble is O(dt); dissipation dominates it
    assert np.all(np.diff(energies) <= 1e-3 * np.abs(energies[0]))
    assert energies[-1] < energies[0]


def test_dt_halving_is_first_order(lwr):
    plant = Plant([lwr], friction=0.1)
    q0 = [np.array([0.3, -0.6, 0.2, 1.1, -0.4, 0.5, 0.1])]
    qd0 = [np.zeros(7)]
    finals = {dt: _run(plant, q0, qd0, 0.4, dt).q[0] for dt in (0.004, 0.002, 0.001)}
    d1 = np.abs(finals[0.004] - finals[0.002]).max()
    d2 = np.abs(finals[0.002] - finals[0.001]).max()
    assert d1 / d2 == pytest.approx(2.0, rel=0.15)


def test_locked_joint_stays_put(lwr, rng):
    m = lwr.with_locked({2: 0.3})
    plant = Plant([m])
    s = _run(plant, [m.apply_locks(random_q(m, rng))], [np.zeros(7)], 0.1, DT)
    assert s.q[0][2] == 0.3 and s.qdot[0][2] == 0.0


def test_non_finite_state_aborts_with_tick(lwr, rng):
    plant = Plant([lwr])
    state = SimState(0.0, [random_q(lwr, rng)], [np.zeros(7)], tick=7)
    with pytest.raises(SimulationError) as info:
        step(plant, state, [np.full(7, np.inf)], None, DT)
    assert info.value.tick == 7
    # finite but overflowing torques diverge inside the step
    with pytest.raises(SimulationError), np.errstate(all="ignore"):
        step(plant, state, [np.full(7, 1e308)], None, DT)
    with pytest.raises(ValueError):
        step(plant, state, [np.zeros(7)], None, 0.0)


def test_push_moves_arm_along_push(lwr, rng):
    q = np.array([0.3, -0.6, 0.2, 1.1, -0.4, 0.5, 0.1])
    plant = Plant([lwr], friction=0.0, gravity=np.zeros(3))
    prof = PerturbationProfile.push(0, 0.0, [10.0, 0, 0])
    state = SimState(0.0, [q], [np.zeros(7)])
    for _ in range(25):
        state = step(plant, state, [np.zeros(7)], prof, DT)
    p0, _ = fk_and_jacobian(lwr, q)
    p1, _ = fk_and_jacobian(lwr, state.q[0])
    assert p1.p[0] > p0.p[0]


def test_injected_joint_torques_equal_commanded(lwr, rng):
    plant = Plant([lwr])
    q = random_q(lwr, rng)
    tau = rng.normal(size=7)
    s0 = SimState(0.0, [q], [np.zeros(7)])
    a = step(plant, s0, [tau], None, DT)
    b = step(plant, s0, [np.zeros(7)], None, DT, joint_torques=[tau])
    np.testing.assert_array_equal(a.q[0], b.q[0])


def test_measured_torques(lwr, rng):
    _, J = fk_and_jacobian(lwr, random_q(lwr, rng))
    tau = rng.normal(size=7)
    np.testing.assert_array_equal(measured_joint_torques(tau, J), tau)
    w = rng.normal(size=6)
    np.testing.assert_allclose(measured_joint_torques(tau, J, w) - tau, J.T @ w, atol=1e-14)


def test_sensor_noise_statistics(lwr, rng):
    _, J = fk_and_jacobian(lwr, random_q(lwr, rng))
    tau, w = rng.normal(size=7), rng.normal(size=6)
    sigma, n = 0.05, 10_000
    gen = np.random.default_rng(99)
    resid = np.array([measured_joint_torques(tau, J, w, sigma, gen) - tau - J.T @ w for _ in range(n)])
    assert np.all(np.abs(resid.mean(axis=0)) <= 3 * sigma / np.sqrt(n))
    np.testing.assert_allclose(resid.std(axis=0), sigma, rtol=0.05)


def test_perturbation_profile_shape():
    prof = PerturbationProfile.push(0, 10.0, [0, 25.0, 0])
    assert prof.wrench(9.99)[1] == 0.0
    assert prof.wrench(10.5)[1] == pytest.approx(12.5)
    assert prof.wrench(12.0)[1] == 25.0
    assert prof.wrench(13.25)[1] == pytest.approx(12.5)
    assert prof.wrench(13.5)[1] == 0.0
    assert prof.windows == [(10.0, 11.0), (11.0, 13.0), (13.0, 13.5)]
    w = prof.wrenches(12.0)
    assert w[0][1] == 25.0 and not np.any(w[1])


def test_sine_and_zero_segments():
    s = PerturbationSegment("sine", 0.0, 1.0, [1, 0, 0, 0, 0, 0], freq=2.0)
    assert s.value(0.125)[0] == pytest.approx(1.0)
    assert not np.any(PerturbationSegment("zero", 0.0, 1.0).value(0.5))


def test_perturbation_profile_validation():
    seg = PerturbationSegment("hold", 0.0, 2.0, [10, 0, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        PerturbationProfile(0, (seg, PerturbationSegment("hold", 1.0, 3.0)))
    with pytest.raises(ValueError):
        PerturbationProfile(0, (seg,), cap=5.0)
    with pytest.raises(ValueError):
        PerturbationSegment("push", 0.0, 1.0)
    with pytest.raises(ValueError):
        PerturbationSegment("hold", 1.0, 1.0)


def test_simulation_is_deterministic(lwr, rng):
    plant = Plant([lwr, lwr], friction=0.1)
    q = [random_q(lwr, rng), random_q(lwr, rng)]
    prof = PerturbationProfile.push(1, 0.0, [5.0, 0, 0], ramp=0.05, hold=0.05, release=0.05)
    runs = []
    for _ in range(2):
        s = SimState(0.0, [x.copy() for x in q], [np.zeros(7), np.zeros(7)])
        for _ in range(100):
            s = step(plant, s, [np.ones(7), -np.ones(7)], prof, DT)
        runs.append(np.concatenate(s.q + s.qdot).tobytes())
    assert runs[0] == runs[1]


def test_planar_chain_swings_under_gravity():
    arm = planar_arm()
    plant = Plant([arm], friction=0.0, gravity=np.array([0.0, -9.81, 0.0]))
    s = _run(plant, [np.zeros(2)], [np.zeros(2)], 0.1, DT)
    assert s.q[0][0] < 0
