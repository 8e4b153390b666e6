"""Two-level tracking control.

The inner loop cancels the dynamics of the outputs ``h = (h_r, q_N)`` with
``h_r = q_r - href(q_N)`` so that ``ddh_r = v_r`` and ``ddq_N = v_N``. The
outer loop uses a PD law on ``h_r`` and a speed/momentum law on ``q_N`` built
from the error coordinates

    b = sigma_N - S(q_N)
    c = dq_N - V(q_N) - (gamma / beta0) S'(q_N) b

The disc angle ``q_d`` never enters any control expression.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .dynamics import QN, QR, RobotParams, State, dyn_terms, gravity_vector, vel_from_omega
from .errors import SingularDecoupling
from .gait import GaitSpec

COND_LIMIT = 1e8


@dataclass(frozen=True)
class Gains:
    K_P: float = 100.0
    K_V: float = 10.0
    beta0: float = 4.5
    gamma: float = 0.35

    def __post_init__(self):
        if self.K_P <= 0 or self.K_V <= 0 or self.beta0 <= 0:
            raise ValueError("K_P, K_V and beta0 must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    @property
    def ratio(self) -> float:
        return self.gamma / self.beta0

    def scaled(self, k: float) -> "Gains":
        return Gains(self.K_P * k, self.K_V * k, self.beta0 * k, self.gamma * k)

    def to_dict(self) -> dict:
        return asdict(self)


class YState(NamedTuple):
    h_r: float
    h_r_dot: float
    b: float
    c: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def output_h(g: GaitSpec, x: State) -> tuple[float, float]:
    q_r, q_N = x.q[QR], x.q[QN]
    _, dq_r, dq_N = x.omega
    h, dh, _ = g.href(q_N)
    return q_r - h, dq_r - dh * dq_N


def bc_coords(g: GaitSpec, gains: Gains, x: State) -> YState:
    h_r, h_r_dot = output_h(g, x)
    q_N = x.q[QN]
    sigma, _, dq_N = x.omega
    S, dS, _ = g.S(q_N)
    V, _ = g.V(q_N)
    b = sigma - S
    c = dq_N - V - gains.ratio * dS * b
    return YState(h_r, h_r_dot, b, c)


def state_from_y(g: GaitSpec, gains: Gains, y, q_N: float, q_d: float = 0.0) -> State:
    """Inverse of :func:`bc_coords` at a given stance angle."""
    h_r, h_r_dot, b, c = y
    h, dh, _ = g.href(q_N)
    S, dS, _ = g.S(q_N)
    V, _ = g.V(q_N)
    dq_N = c + V + gains.ratio * dS * b
    return State([q_d, h_r + h, q_N], [b + S, h_r_dot + dh * dq_N, dq_N])


def guard_stance_angle(g: GaitSpec, h_r: float) -> float:
    """Stance angle where the forward swing foot touches ground for offset ``h_r``.

    Touchdown ahead of the stance foot means ``q_N + q_r = -q_N``.
    """
    pad = 0.5 * g.margin * g.step_length
    f = lambda q: h_r + g.href(q)[0] + 2.0 * q
    return brentq(f, g.qN_minus - pad, g.qN_minus + pad, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def state_from_y_on_guard(g: GaitSpec, gains: Gains, y) -> State:
    return state_from_y(g, gains, y, guard_stance_angle(g, y[0]))


def decoupling(p: RobotParams, g: GaitSpec, x: State):
    """Decoupling matrix ``L_g L_f h`` and drift term ``L_f^2 h``."""
    q = x.q
    dq = vel_from_omega(p, q, x.omega)
    D, C, G, B = dyn_terms(p, q, dq)
    _, dh, ddh = g.href(q[QN])
    Jh = np.array([[0.0, 1.0, -dh], [0.0, 0.0, 1.0]])
    Dinv = np.linalg.inv(D)
    A = Jh @ Dinv @ B
    drift = Jh @ Dinv @ (-C @ dq - G) + np.array([-ddh * dq[QN] ** 2, 0.0])
    return A, drift


def feedback_linearize(p: RobotParams, g: GaitSpec, x: State, v) -> np.ndarray:
    A, drift = decoupling(p, g, x)
    if np.linalg.cond(A) >= COND_LIMIT:
        raise SingularDecoupling(f"decoupling matrix condition number {np.linalg.cond(A):.3e}")
    return np.linalg.solve(A, np.asarray(v, dtype=float) - drift)


def v_r(gains: Gains, h_r, h_r_dot):
    return -gains.K_P * np.asarray(h_r) - gains.K_V * np.asarray(h_r_dot)


def k2_state(p: RobotParams, q) -> float:
    """Momentum rate ``-G_N`` at the actual configuration."""
    return float(-gravity_vector(p, q[QR], q[QN])[QN])


def v_N(p: RobotParams, g: GaitSpec, gains: Gains, x: State) -> float:
    q_N = x.q[QN]
    _, _, dq_N = x.omega
    y = bc_coords(g, gains, x)
    V, dV = g.V(q_N)
    _, dS, d2S = g.S(q_N)
    k = gains.ratio
    b_dot = k2_state(p, x.q) - dS * dq_N
    return (
        dV * dq_N
        + gains.gamma * dS * y.b
        - gains.beta0 * (dq_N - V)
        + k * (d2S * dq_N * y.b + dS * b_dot)
    )


def control(p: RobotParams, g: GaitSpec, gains: Gains, x: State):
    """Full law: returns ``(u, v)`` with ``v = (v_r, v_N)``."""
    h_r, h_r_dot = output_h(g, x)
    v = np.array([float(v_r(gains, h_r, h_r_dot)), v_N(p, g, gains, x)])
    return feedback_linearize(p, g, x, v), v


def disc_relative_speed(p: RobotParams, x: State) -> float:
    return float(vel_from_omega(p, x.q, x.omega)[0])
