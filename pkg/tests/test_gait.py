import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from discwalker.controller import bc_coords, state_from_y_on_guard
from discwalker.dynamics import RobotParams
from discwalker.errors import InfeasibleBoundary, NoPeriodicGait, OutOfRange
from discwalker.gait import GaitRequest, design_gait, f2, k2, load_gait, save_gait
from discwalker.impact import apply_impact, swing_foot_height


@lru_cache
def _default_gait():
    return design_gait(RobotParams())


def test_residual_and_momentum_balance(gait):
    assert abs(gait.residual) < 1e-9
    S_minus, _, _ = gait.S(gait.qN_minus)
    S_plus, _, _ = gait.S(gait.qN_plus)
    assert abs(S_minus - S_plus - gait.delta_sigma) < 1e-9


def test_regression_anchor(gait):
    np.testing.assert_allclose(gait.V_params, [0.8630625, 0.0453299, -0.4], atol=1e-6)
    assert gait.delta_sigma == pytest.approx(1.3058238, abs=1e-6)
    assert gait.sigmaN_plus == pytest.approx(6.9765162, abs=1e-6)


def test_boundary_geometry(params, gait):
    h_plus, _, _ = gait.href(gait.qN_plus)
    h_minus, _, _ = gait.href(gait.qN_minus)
    assert h_plus == pytest.approx(gait.q_bar_plus[1], abs=1e-14)
    assert h_minus == pytest.approx(gait.q_bar_minus[1], abs=1e-14)
    assert abs(swing_foot_height(params, gait.q_bar_minus)) < 1e-14
    assert gait.qN_minus + h_minus == pytest.approx(-gait.qN_minus, abs=1e-14)


def test_impact_invariance(params, gait, gains):
    """The nominal pre-impact state is sent exactly onto the post-impact profiles."""
    s = state_from_y_on_guard(gait, gains, np.zeros(4))
    post = apply_impact(params, s).post_state
    y = bc_coords(gait, gains, post)
    assert post.q[2] == pytest.approx(gait.qN_plus, abs=1e-12)
    assert np.abs(y.as_array()).max() < 1e-9


def test_S_matches_direct_quadrature(params, gait):
    def integrand(t):
        return k2(params, gait, 0.0, t) / gait.V(t)[0]

    for qN in np.linspace(gait.qN_plus, gait.qN_minus, 9):
        val, _ = quad(integrand, gait.qN_plus, qN, epsabs=1e-12, epsrel=1e-12)
        assert gait.S(qN)[0] == pytest.approx(gait.sigmaN_plus + val, abs=1e-9)


@given(st.floats(-0.26, 0.26))
def test_S_derivatives_consistent(q):
    g = _default_gait()
    p = RobotParams()
    S, dS, d2S = g.S(q)
    assert dS == pytest.approx(k2(p, g, 0.0, q) / g.V(q)[0], abs=1e-8)
    h = 1e-5
    assert d2S == pytest.approx((g.S(q + h)[1] - g.S(q - h)[1]) / (2 * h), abs=1e-4)


def test_speed_profile_consistent(gait):
    lam = gait.V(gait.qN_plus)[0] / gait.V(gait.qN_minus)[0]
    assert 0 < lam < 2
    qs = np.linspace(gait.qN_plus, gait.qN_minus, 101)
    assert min(gait.V(q)[0] for q in qs) > 0.3


def test_f2_is_partial_of_k2(params, gait):
    for q in np.linspace(gait.qN_plus, gait.qN_minus, 5):
        h, _, _ = gait.href(q)
        analytic = -params.g * params.m_l * params.l_c * math.cos(q + h)
        assert f2(params, gait, q) == pytest.approx(analytic, abs=1e-6)


def test_out_of_range(gait):
    pad = gait.margin * gait.step_length
    gait.S(gait.qN_minus + 0.99 * pad)
    with pytest.raises(OutOfRange):
        gait.S(gait.qN_minus + 1.01 * pad)
    with pytest.raises(OutOfRange):
        gait.href(gait.qN_plus - 1.01 * pad)


def test_round_trip(tmp_path, gait):
    path = tmp_path / "g.json"
    save_gait(gait, path)
    g2 = load_gait(path)
    for q in np.linspace(gait.qN_plus, gait.qN_minus, 7):
        assert g2.S(q) == gait.S(q)
        assert g2.href(q) == gait.href(q)
    save_gait(g2, tmp_path / "g2.json")
    assert (tmp_path / "g2.json").read_bytes() == path.read_bytes()


def test_design_deterministic(params, gait):
    assert design_gait(params).to_dict() == gait.to_dict()


def test_infeasible_requests(params):
    with pytest.raises(InfeasibleBoundary):
        design_gait(params, GaitRequest(qr_minus=0.0))
    with pytest.raises(NoPeriodicGait):
        design_gait(params, GaitRequest(bezier_mid=0.3))
