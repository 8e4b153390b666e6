import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from discwalker.dynamics import (
    B_MATRIX,
    RobotParams,
    accelerations,
    coriolis_matrix,
    dyn_terms,
    gravity_vector,
    kinetic_energy,
    mass_matrix,
    mass_matrix_dqr,
    momentum,
    omega_from_vel,
    perturb_params,
    potential_energy,
    total_energy,
    vel_from_omega,
)
from discwalker.errors import OutOfBounds

angle = st.floats(-1.5, 1.5)
rate = st.floats(-5.0, 5.0)


def test_against_symbolic_oracle(oracle, rng):
    for _ in range(50):
        p = RobotParams(
            L=rng.uniform(0.6, 1.4), m_l=rng.uniform(1, 8), l_c=rng.uniform(0.1, 0.55),
            I_l=rng.uniform(0.05, 1), m_h=rng.uniform(2, 15), J_d=rng.uniform(0.05, 2), g=9.81,
        )
        q = rng.uniform(-1.5, 1.5, 3)
        dq = rng.uniform(-4, 4, 3)
        P = tuple(p.as_array())
        D, C, G, _ = dyn_terms(p, q, dq)
        np.testing.assert_allclose(D, np.array(oracle["D"](P, q, dq), dtype=float), atol=1e-12)
        np.testing.assert_allclose(C, np.array(oracle["C"](P, q, dq), dtype=float), atol=1e-11)
        np.testing.assert_allclose(G, np.array(oracle["G"](P, q, dq), dtype=float).ravel(), atol=1e-11)
        assert kinetic_energy(p, q, dq) == pytest.approx(float(oracle["T"](P, q, dq)), abs=1e-11)
        # potentials agree up to a constant: compare differences
        q2 = rng.uniform(-1.5, 1.5, 3)
        dU = potential_energy(p, q) - potential_energy(p, q2)
        assert dU == pytest.approx(float(oracle["U"](P, q, dq) - oracle["U"](P, q2, dq)), abs=1e-10)


@given(angle)
def test_mass_matrix_spd(q_r):
    D = mass_matrix(RobotParams(), q_r)
    np.testing.assert_array_equal(D, D.T)
    assert np.all(np.linalg.eigvalsh(D) > 0)


@given(angle, rate, rate, rate)
def test_dot_D_minus_2C_skew(q_r, a, b, c):
    p = RobotParams()
    dq = np.array([a, b, c])
    N = mass_matrix_dqr(p, q_r) * dq[1] - 2.0 * coriolis_matrix(p, q_r, dq)
    np.testing.assert_allclose(N + N.T, 0.0, atol=1e-12)


def test_dD_matches_finite_difference():
    p = RobotParams()
    for q_r in np.linspace(-1, 1, 7):
        fd = (mass_matrix(p, q_r + 1e-6) - mass_matrix(p, q_r - 1e-6)) / 2e-6
        np.testing.assert_allclose(mass_matrix_dqr(p, q_r), fd, atol=1e-8)


def test_disc_is_cyclic_and_gravity_free():
    p = RobotParams()
    assert gravity_vector(p, 0.3, -0.2)[0] == 0.0
    q = np.array([0.0, 0.4, -0.1])
    dq = np.array([1.0, -0.5, 0.7])
    D1, C1, G1, _ = dyn_terms(p, q, dq)
    D2, C2, G2, _ = dyn_terms(p, q + np.array([2.5, 0, 0]), dq)
    np.testing.assert_array_equal(D1, D2)
    np.testing.assert_array_equal(C1, C2)
    np.testing.assert_array_equal(G1, G2)
    assert B_MATRIX[2].tolist() == [0.0, 0.0]


@given(angle, angle, rate, rate, rate, st.floats(-50, 50), st.floats(-50, 50))
def test_momentum_rate_is_gravity_only(q_r, q_N, a, b, c, u1, u2):
    """d sigma_N / dt = -G_N whatever the torques."""
    p = RobotParams()
    q = np.array([0.0, q_r, q_N])
    dq = np.array([a, b, c])
    ddq = accelerations(p, q, dq, [u1, u2])
    D = mass_matrix(p, q_r)
    dDN = mass_matrix_dqr(p, q_r)[2] * b
    rate_ = D[2] @ ddq + dDN @ dq
    assert rate_ == pytest.approx(-gravity_vector(p, q_r, q_N)[2], abs=1e-9 * (1 + abs(u1) + abs(u2)))


@given(angle, angle, rate, rate, rate, st.floats(-20, 20), st.floats(-20, 20))
def test_power_balance(q_r, q_N, a, b, c, u1, u2):
    """dE/dt = dq . B u."""
    p = RobotParams()
    q = np.array([0.0, q_r, q_N])
    dq = np.array([a, b, c])
    u = np.array([u1, u2])
    ddq = accelerations(p, q, dq, u)
    h = 1e-6
    E = lambda s: total_energy(p, q + s * dq + 0.5 * s * s * ddq, dq + s * ddq)
    dE = (E(h) - E(-h)) / (2 * h)
    assert dE == pytest.approx(dq @ B_MATRIX @ u, abs=1e-5 * (1 + np.abs(dq).max() ** 3 + np.abs(u).max()))


@given(angle, angle, rate, rate, rate)
def test_omega_round_trip(q_r, q_N, a, b, c):
    p = RobotParams()
    q = np.array([0.0, q_r, q_N])
    dq = np.array([a, b, c])
    np.testing.assert_allclose(vel_from_omega(p, q, omega_from_vel(p, q, dq)), dq, atol=1e-12)
    assert omega_from_vel(p, q, dq)[0] == momentum(p, q, dq)


def test_params_validation():
    with pytest.raises(ValueError):
        RobotParams(m_l=0.0)
    with pytest.raises(ValueError):
        RobotParams(l_c=2.0)


def test_perturb_params():
    p = RobotParams()
    assert perturb_params(p, {}) == p
    q = perturb_params(p, {"m_l": 1.1})
    assert q.m_l == pytest.approx(5.5) and replace(q, m_l=p.m_l) == p
    back = perturb_params(perturb_params(p, {"I_l": 1.7}), {"I_l": 1 / 1.7})
    assert abs(back.I_l - p.I_l) < 1e-15
    with pytest.raises(OutOfBounds):
        perturb_params(p, {"m_h": 2.0})
    with pytest.raises(OutOfBounds):
        perturb_params(p, {"m_h": 0.5})
    with pytest.raises(KeyError):
        perturb_params(p, {"mass": 1.1})
