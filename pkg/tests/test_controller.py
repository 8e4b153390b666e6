import numpy as np
import pytest
from hypothesis import given, strategies as st

from discwalker import controller as ctl
from discwalker.controller import Gains, YState, bc_coords, control, output_h, state_from_y, v_N, v_r
from discwalker.dynamics import State, accelerations, omega_from_vel, vel_from_omega
from discwalker.errors import SingularDecoupling


def random_state(g, rng):
    q_N = rng.uniform(g.qN_plus, g.qN_minus)
    q = np.array([rng.uniform(-3, 3), g.href(q_N)[0] + rng.normal(0, 0.1), q_N])
    return State(q, [g.S(q_N)[0] + rng.normal(0, 1), rng.normal(0, 1), g.V(q_N)[0] + rng.normal(0, 0.2)])


def test_gains_validation():
    with pytest.raises(ValueError):
        Gains(K_P=0.0)
    with pytest.raises(ValueError):
        Gains(gamma=-1.0)
    assert Gains(gamma=0.0).ratio == 0.0
    assert Gains().scaled(10).K_V == 100.0


def test_output_on_gait_is_zero(gait, gains):
    for q_N in np.linspace(gait.qN_plus, gait.qN_minus, 5):
        s = state_from_y(gait, gains, np.zeros(4), q_N)
        assert output_h(gait, s) == pytest.approx((0.0, 0.0), abs=1e-14)
        assert np.abs(bc_coords(gait, gains, s).as_array()).max() < 1e-13


def test_output_offset(gait):
    q_N = 0.05
    h, dh, _ = gait.href(q_N)
    s = State([0.0, h + 0.1, q_N], [1.0, 0.0, 0.0])
    assert output_h(gait, s) == pytest.approx((0.1, 0.0), abs=1e-14)
    s = State([0.0, h + 0.1, q_N], [1.0, 0.0, 0.3])
    assert output_h(gait, s)[1] == pytest.approx(-dh * 0.3, abs=1e-14)


def test_bc_examples(gait, gains):
    q_N = -0.1
    S, dS, _ = gait.S(q_N)
    V, _ = gait.V(q_N)
    h, dh, _ = gait.href(q_N)
    s = State([0.0, h, q_N], [S + 1.0, dh * V, V])
    y = bc_coords(gait, gains, s)
    assert y.b == pytest.approx(1.0, abs=1e-12)
    assert y.c == pytest.approx(-gains.ratio * dS, abs=1e-12)
    y0 = bc_coords(gait, Gains(gamma=0.0), s)
    assert y0.c == pytest.approx(0.0, abs=1e-12)


def test_state_from_y_inverts_bc(gait, gains, rng):
    for _ in range(20):
        y = rng.normal(0, 0.1, 4)
        s = state_from_y(gait, gains, y, rng.uniform(gait.qN_plus, gait.qN_minus))
        np.testing.assert_allclose(bc_coords(gait, gains, s).as_array(), y, atol=1e-12)


def test_v_r_examples():
    assert v_r(Gains(), 0.0, 0.0) == 0.0
    assert v_r(Gains(K_P=4.0), 1.0, 0.0) == -4.0


def test_substitution_oracle(params, gait, gains, rng):
    """Closed loop gives ddh_r = v_r and ddq_N = v_N exactly."""
    for _ in range(100):
        s = random_state(gait, rng)
        u, v = control(params, gait, gains, s)
        dq = vel_from_omega(params, s.q, s.omega)
        ddq = accelerations(params, s.q, dq, u)
        _, dh, ddh = gait.href(s.q[2])
        ddh_r = ddq[1] - dh * ddq[2] - ddh * dq[2] ** 2
        assert ddh_r == pytest.approx(v[0], abs=1e-8 * (1 + abs(v[0])))
        assert ddq[2] == pytest.approx(v[1], abs=1e-8 * (1 + abs(v[1])))


def test_v_N_on_zero_dynamics(params, gait, gains):
    for q_N in np.linspace(gait.qN_plus, gait.qN_minus, 5):
        s = state_from_y(gait, gains, np.zeros(4), q_N)
        V, dV = gait.V(q_N)
        # S' comes from the interpolant, k2 from the model: they agree to ~1e-10
        assert v_N(params, gait, gains, s) == pytest.approx(dV * V, abs=1e-8)


def test_v_N_algebraic_oracle(params, gait, gains):
    """b = 1, dq_N = V, h_r = 0: expanded law term by term."""
    q_N = 0.1
    S, dS, d2S = gait.S(q_N)
    V, dV = gait.V(q_N)
    h, dh, _ = gait.href(q_N)
    k = gains.ratio
    s = State([0.0, h, q_N], [S + 1.0, dh * V, V])
    k2 = ctl.k2_state(params, s.q)
    c = -k * dS
    expected = dV * V + gains.gamma * dS - gains.beta0 * (V - V) + k * (d2S * V + (k2 - dS * V))
    assert v_N(params, gait, gains, s) == pytest.approx(expected, abs=1e-10)
    assert bc_coords(gait, gains, s).c == pytest.approx(c, abs=1e-12)


def test_disc_angle_does_not_enter_control(params, gait, gains, rng):
    for _ in range(10):
        s = random_state(gait, rng)
        u1, _ = control(params, gait, gains, s)
        u2, _ = control(params, gait, gains, State(s.q + np.array([5.0, 0, 0]), s.omega))
        assert np.array_equal(u1, u2)


def test_singular_decoupling(params, gait, gains, monkeypatch):
    s = state_from_y(gait, gains, np.zeros(4), 0.0)
    monkeypatch.setattr(ctl, "decoupling", lambda *a: (np.zeros((2, 2)), np.zeros(2)))
    with pytest.raises(SingularDecoupling):
        ctl.feedback_linearize(params, gait, s, [0.0, 0.0])


def test_guard_stance_angle(gait):
    q = ctl.guard_stance_angle(gait, 0.0)
    assert q == pytest.approx(gait.qN_minus, abs=1e-14)
    q2 = ctl.guard_stance_angle(gait, 0.01)
    assert q2 + gait.href(q2)[0] + 0.01 == pytest.approx(-q2, abs=1e-13)
