import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from discwalker.controller import state_from_y_on_guard
from discwalker.dynamics import RobotParams, State, kinetic_energy, momentum, omega_from_vel, vel_from_omega
from discwalker.errors import NotOnGuard, PenetrationImpact, SingularImpact
from discwalker.impact import (
    apply_impact,
    delta_omega,
    delta_q,
    delta_y_assembled,
    swing_foot_height,
    swing_foot_height_rate,
)
from discwalker.stability import linearized_impact


def guard_state(q_N, dq):
    """Pre-impact configuration with the swing foot ahead on the ground."""
    q = np.array([0.3, -2.0 * q_N, q_N])
    return q, np.asarray(dq, dtype=float)


def test_delta_q_involution():
    D = delta_q()
    assert np.array_equal(D @ D, np.eye(3, dtype=int))


@given(st.floats(0.05, 0.6))
def test_relabel_keeps_bisector_and_guard(q_N):
    q, _ = guard_state(q_N, np.zeros(3))
    qp = delta_q() @ q
    assert qp[2] + qp[1] / 2 == pytest.approx(q[2] + q[1] / 2, abs=1e-15)
    assert abs(swing_foot_height(RobotParams(), qp)) < 1e-14


@given(st.floats(0.05, 0.6), st.floats(-2.0, 0.0), st.floats(0.1, 3.0))
def test_delta_omega_first_column(q_N, q_r_scale, _):
    p = RobotParams()
    Dw = delta_omega(p, -2.0 * q_N, q_N)
    assert np.linalg.norm(Dw[:, 0] - np.array([1.0, 0.0, 0.0])) < 1e-12


@given(st.floats(0.1, 0.5), st.floats(-1.0, 1.0), st.floats(-3.0, 0.0), st.floats(0.3, 2.0))
def test_impact_properties(q_N, dq_d, dq_r, dq_N):
    p = RobotParams()
    q, dq = guard_state(q_N, [dq_d, dq_r, dq_N])
    if not swing_foot_height_rate(p, q, dq) < -1e-3:
        return
    res = apply_impact(p, State(q, omega_from_vel(p, q, dq)), strict=False)
    post = res.post_state
    dq_plus = vel_from_omega(p, post.q, post.omega)
    # plastic impact never adds energy
    assert kinetic_energy(p, post.q, dq_plus) <= kinetic_energy(p, q, dq) + 1e-10
    # omega map reproduces the full reset
    np.testing.assert_allclose(delta_omega(p, q[1], q[2]) @ omega_from_vel(p, q, dq), post.omega, atol=1e-10)
    # absolute disc spin is continuous: the motor torque is finite
    spin = lambda v: v[0] + v[2] + 0.5 * v[1]
    assert spin(dq_plus) == pytest.approx(spin(dq), abs=1e-9)


def test_apply_impact_on_nominal(params, gait, gains):
    s = state_from_y_on_guard(gait, gains, np.zeros(4))
    res = apply_impact(params, s)
    assert res.impulse[1] > 0
    post = res.post_state
    dq = vel_from_omega(params, post.q, post.omega)
    assert swing_foot_height_rate(params, post.q, dq) > 0


def test_apply_impact_errors(params):
    q = np.array([0.0, -0.4, 0.25])
    with pytest.raises(NotOnGuard):
        apply_impact(params, State(q, [0.0, 0.0, 0.5]))
    q, dq = guard_state(0.25, [0.0, 0.0, -0.5])  # moving backwards: foot rises
    with pytest.raises(NotOnGuard):
        apply_impact(params, State(q, omega_from_vel(params, q, dq)))
    with pytest.raises(SingularImpact):
        apply_impact(params, State([0.0, 0.0, 0.1], [0.0, -1.0, 1.0]), strict=False)


def test_penetration_detected(params):
    # foot comes down only because the stance leg rotates backwards
    q, dq = guard_state(0.26, [0.0, 1.0, 0.0])
    assert swing_foot_height_rate(params, q, dq) < 0
    with pytest.raises(PenetrationImpact):
        apply_impact(params, State(q, omega_from_vel(params, q, dq)))


def test_assembled_velocity_block_matches_numeric(params, gait, gains):
    num = linearized_impact(params, gait, gains)
    ana = delta_y_assembled(params, gait, gains)
    np.testing.assert_allclose(ana[1:, 1:], num[1:, 1:], atol=1e-5)
    assert ana[0, 0] == pytest.approx(num[0, 0], abs=1e-6)
