"""Swing-foot guard and rigid plastic impact map.

The impact is solved in extended coordinates ``(q_d, q_r, q_N, x_h, z_h)``
where the hip is free; the impulse pins the swing foot and the old stance foot
leaves the ground without interaction. Afterwards the legs are relabeled with
the constant involution :func:`delta_q`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .dynamics import QD, QN, QR, RobotParams, State, omega_matrix, vel_from_omega
from .errors import NotOnGuard, PenetrationImpact, SingularImpact

if TYPE_CHECKING:
    from .controller import Gains
    from .gait import GaitSpec

GUARD_EPS = 1e-10

_DELTA_Q = np.array([[1, 0, 0], [0, -1, 0], [0, 1, 1]])


def delta_q() -> np.ndarray:
    """Leg relabeling: ``q_N+ = q_N + q_r``, ``q_r+ = -q_r``, ``q_d`` kept."""
    return _DELTA_Q.copy()


def swing_foot_height(p: RobotParams, q) -> float:
    return float(p.L * (np.cos(q[QN]) - np.cos(q[QN] + q[QR])))


def swing_foot_height_rate(p: RobotParams, q, dq) -> float:
    th2 = q[QN] + q[QR]
    return float(p.L * (-np.sin(q[QN]) * dq[QN] + np.sin(th2) * (dq[QN] + dq[QR])))


def _extended_inertia(p: RobotParams, q) -> np.ndarray:
    q_r, q_N = q[QR], q[QN]
    th2 = q_N + q_r
    De = np.zeros((5, 5))
    # hip point mass
    De[3:, 3:] += p.m_h * np.eye(2)
    # legs: COM = hip + l_c * (sin a, -cos a)
    for angle, cols in ((q_N, (QN,)), (th2, (QR, QN))):
        Jv = np.zeros((2, 5))
        Jv[:, 3:] = np.eye(2)
        for c in cols:
            Jv[:, c] = p.l_c * np.array([np.cos(angle), np.sin(angle)])
        Jw = np.zeros(5)
        Jw[list(cols)] = 1.0
        De += p.m_l * Jv.T @ Jv + p.I_l * np.outer(Jw, Jw)
    Jd = np.array([1.0, 0.5, 1.0, 0.0, 0.0])
    De += p.J_d * np.outer(Jd, Jd)
    return De


def _swing_foot_jacobian(p: RobotParams, q) -> np.ndarray:
    th2 = q[QN] + q[QR]
    J = np.zeros((2, 5))
    J[:, QR] = J[:, QN] = p.L * np.array([np.cos(th2), np.sin(th2)])
    J[:, 3:] = np.eye(2)
    return J


def _pinned_embedding(p: RobotParams, q) -> np.ndarray:
    """Map from pinned ``dq`` to extended velocities."""
    E = np.zeros((5, 3))
    E[:3] = np.eye(3)
    E[3:, QN] = p.L * np.array([-np.cos(q[QN]), -np.sin(q[QN])])
    return E


def _impact_operators(p: RobotParams, q):
    """Return ``(Pi, Fmap)``: ``dq_e+ = Pi dq``, ``impulse = Fmap dq`` (pinned ``dq``)."""
    if abs(2.0 * p.L * np.sin(0.5 * q[QR])) < 1e-9:
        raise SingularImpact("feet coincide; contact constraint is degenerate")
    De = _extended_inertia(p, q)
    J = _swing_foot_jacobian(p, q)
    K = np.zeros((7, 7))
    K[:5, :5] = De
    K[:5, 5:] = -J.T
    K[5:, :5] = J
    if np.linalg.cond(K) > 1e12:
        raise SingularImpact("impact KKT system is ill conditioned")
    rhs = np.zeros((7, 3))
    rhs[:5] = De @ _pinned_embedding(p, q)
    sol = np.linalg.solve(K, rhs)
    return sol[:5], sol[5:]


def delta_omega(p: RobotParams, q_r: float, q_N: float) -> np.ndarray:
    """Matrix taking ``omega-`` to ``omega+`` at pre-impact ``(q_r, q_N)``."""
    q = np.array([0.0, q_r, q_N])
    Pi, _ = _impact_operators(p, q)
    W_minus = omega_matrix(p, q)
    W_plus = omega_matrix(p, _DELTA_Q @ q)
    return W_plus @ _DELTA_Q @ Pi[:3] @ np.linalg.inv(W_minus)


@dataclass(frozen=True)
class ImpactResult:
    post_state: State
    impulse: np.ndarray  # (horizontal, vertical) at the new stance foot, N s
    slip_check: float  # |horizontal| / vertical impulse


def apply_impact(p: RobotParams, x: State, strict: bool = True) -> ImpactResult:
    """Reset ``x-`` on the guard to ``x+``.

    ``strict=False`` skips the guard preconditions and the post-impact
    separation check (used for degenerate zero-velocity touchdowns).
    """
    q = x.q
    dq = vel_from_omega(p, q, x.omega)
    if strict:
        h = swing_foot_height(p, q)
        hdot = swing_foot_height_rate(p, q, dq)
        if abs(h) > GUARD_EPS or not hdot < 0.0:
            raise NotOnGuard(f"p2 = {h:.3e}, dp2 = {hdot:.3e}")
    Pi, Fmap = _impact_operators(p, q)
    dqe = Pi @ dq
    impulse = Fmap @ dq
    q_plus = _DELTA_Q @ q
    dq_plus = _DELTA_Q @ dqe[:3]
    omega_plus = omega_matrix(p, q_plus) @ dq_plus
    if strict and not swing_foot_height_rate(p, q_plus, dq_plus) > 0.0:
        raise PenetrationImpact("released foot does not lift off")
    vert = impulse[1]
    slip = abs(impulse[0]) / vert if vert > 0 else np.inf
    return ImpactResult(State(q_plus, omega_plus), impulse, float(slip))


def _delta_1(href_slope: float, dS: float, k: float) -> np.ndarray:
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, -href_slope], [-k * dS, 0.0, 1.0]])


def _delta_2(href_slope: float, dS: float, k: float) -> np.ndarray:
    return np.array(
        [[1.0, 0.0, 0.0], [k * href_slope * dS, 1.0, href_slope], [k * dS, 0.0, 1.0]]
    )


def delta_p(
    p: RobotParams, gait: GaitSpec, gains: Gains, h_r_minus: float, qN_minus: float, qN_plus: float
) -> np.ndarray:
    """Impact map on ``(b, dh_r, c)``: ``Delta_1(q_N+) Delta_omega Delta_2(q_N-)``."""
    k = gains.gamma / gains.beta0
    _, slope_m, _ = gait.href(qN_minus)
    _, slope_p, _ = gait.href(qN_plus)
    _, dS_m, _ = gait.S(qN_minus)
    _, dS_p, _ = gait.S(qN_plus)
    href_m, _, _ = gait.href(qN_minus)
    Dw = delta_omega(p, h_r_minus + href_m, qN_minus)
    return _delta_1(slope_p, dS_p, k) @ Dw @ _delta_2(slope_m, dS_m, k)


def delta_y_assembled(p: RobotParams, gait: GaitSpec, gains: Gains) -> np.ndarray:
    """4x4 impact map on ``y = (h_r, dh_r, b, c)`` at the nominal impact.

    The ``h_r`` row comes from the guard geometry; the velocity block is
    :func:`delta_p` reordered. Velocity terms induced by ``h_r`` shifting the
    impact point are not included here; ``stability.linearized_impact``
    captures them numerically.
    """
    qm, qp = gait.qN_minus, gait.qN_plus
    _, slope_m, _ = gait.href(qm)
    _, slope_p, _ = gait.href(qp)
    Dp = delta_p(p, gait, gains, 0.0, qm, qp)
    order = [1, 0, 2]  # (b, dh, c) -> (dh, b, c)
    out = np.zeros((4, 4))
    out[0, 0] = -(2.0 + slope_p) / (2.0 + slope_m)
    out[1:, 1:] = Dp[np.ix_(order, order)]
    return out
