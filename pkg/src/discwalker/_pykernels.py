"""Pure-Python closed-loop vector field (fallback for ``_ckernels``).

Scalar ``math`` code on purpose: the state is six numbers and numpy call
overhead would dominate. The torque is computed by eliminating the
unactuated row of the dynamics, an independent route from the
decoupling-matrix inverse in :mod:`discwalker.controller`.
"""
from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

N_AUX = 9
AUX_FIELDS = ("u_d", "u_r", "sigma_N", "h_r", "h_r_dot", "b", "c", "p2", "sigma_ctrl")


def _lumped(P):
    L, m_l, l_c, I_l, m_h, J_d, g = P
    a = m_l * (L - l_c) ** 2 + I_l + (m_h + m_l) * L * L
    bb = m_l * l_c * l_c + I_l
    e = m_l * (L - l_c) + (m_h + m_l) * L
    return (L, J_d, g, a, bb, e, m_l * L * l_c, m_l * l_c)


def _model(K, q_r, q_N, dq_r, dq_N):
    """Mass-matrix entries, Coriolis vector and gravity for lumped constants ``K``."""
    L, J, g, a, bb, e, mlc, sw = K
    c = mlc * math.cos(q_r)
    s = mlc * math.sin(q_r)
    D = (J, 0.5 * J, J, bb + 0.25 * J, bb - c + 0.5 * J, a + bb - 2.0 * c + J)
    h = (0.0, -s * dq_N * dq_N, s * dq_r * dq_r + 2.0 * s * dq_N * dq_r)
    Gr = g * sw * math.sin(q_N + q_r)
    G = (0.0, Gr, -g * e * math.sin(q_N) + Gr)
    return D, h, G


def _solve_sym3(D, f):
    d00, d01, d02, d11, d12, d22 = D
    c00 = d11 * d22 - d12 * d12
    c01 = d02 * d12 - d01 * d22
    c02 = d01 * d12 - d02 * d11
    det = d00 * c00 + d01 * c01 + d02 * c02
    c11 = d00 * d22 - d02 * d02
    c12 = d01 * d02 - d00 * d12
    c22 = d00 * d11 - d01 * d01
    f0, f1, f2 = f
    return (
        (c00 * f0 + c01 * f1 + c02 * f2) / det,
        (c01 * f0 + c11 * f1 + c12 * f2) / det,
        (c02 * f0 + c12 * f1 + c22 * f2) / det,
    )


class ClosedLoopKernel:
    """Closed-loop ``dx/dt`` for ``x = (q_d, q_r, q_N, dq_d, dq_r, dq_N)``.

    ``plant`` and ``ctrl`` are 7-vectors of robot constants, ``gait`` packs
    ``(qN_plus, qN_minus, bezier[5], theta, a1, a2)``, ``S_x``/``S_c`` are the
    breakpoints and power-basis coefficients of the momentum profile.
    """

    backend = "python"

    def __init__(self, plant, ctrl, gait, S_x, S_c, gains, actuated=True):
        self._Kp = _lumped(tuple(map(float, plant)))
        self._Kc = _lumped(tuple(map(float, ctrl)))
        gait = [float(v) for v in gait]
        self._q0, self._q1 = gait[0], gait[1]
        self._bez = gait[2:7]
        self._theta, self._a1, self._a2 = gait[7:10]
        self._Sx = [float(v) for v in S_x]
        S_c = np.asarray(S_c, dtype=float)
        self._Sc = [tuple(S_c[:, i]) for i in range(S_c.shape[1])]
        self._KP, self._KV, self._beta0, self._gamma = map(float, gains)
        self._actuated = bool(actuated)
        self._L = float(plant[0])

    # reference profiles --------------------------------------------------
    def _href(self, q_N):
        delta = self._q1 - self._q0
        s = (q_N - self._q0) / delta
        t = 1.0 - s
        c0, c1, c2, c3, c4 = self._bez
        h = t**4 * c0 + 4 * s * t**3 * c1 + 6 * s * s * t * t * c2 + 4 * s**3 * t * c3 + s**4 * c4
        dh = 4 * (t**3 * (c1 - c0) + 3 * s * t * t * (c2 - c1) + 3 * s * s * t * (c3 - c2) + s**3 * (c4 - c3))
        ddh = 12 * (t * t * (c2 - 2 * c1 + c0) + 2 * s * t * (c3 - 2 * c2 + c1) + s * s * (c4 - 2 * c3 + c2))
        return h, dh / delta, ddh / (delta * delta)

    def _speed(self, q_N):
        delta = self._q1 - self._q0
        s = 2.0 * (q_N - self._q0) / delta - 1.0
        V = self._theta * (1.0 + self._a1 * s + self._a2 * s * s)
        dV = self._theta * (self._a1 + 2.0 * self._a2 * s) * 2.0 / delta
        return V, dV

    def _momentum_ref(self, q_N):
        x = self._Sx
        i = bisect_right(x, q_N) - 1
        i = min(max(i, 0), len(x) - 2)
        d = q_N - x[i]
        c0, c1, c2, c3, c4, c5 = self._Sc[i]
        S = ((((c0 * d + c1) * d + c2) * d + c3) * d + c4) * d + c5
        dS = (((5 * c0 * d + 4 * c1) * d + 3 * c2) * d + 2 * c3) * d + c4
        d2S = ((20 * c0 * d + 12 * c1) * d + 6 * c2) * d + 2 * c3
        return S, dS, d2S

    # evaluation ------------------------------------------------------------
    def _torque(self, x):
        q_d, q_r, q_N, dq_d, dq_r, dq_N = x
        if not self._actuated:
            return (0.0, 0.0), (0.0,) * 6
        D, h, G = _model(self._Kc, q_r, q_N, dq_r, dq_N)
        sigma = D[2] * dq_d + D[4] * dq_r + D[5] * dq_N
        href, dhref, ddhref = self._href(q_N)
        V, dV = self._speed(q_N)
        S, dS, d2S = self._momentum_ref(q_N)
        k = self._gamma / self._beta0
        h_r = q_r - href
        h_r_dot = dq_r - dhref * dq_N
        b = sigma - S
        c = dq_N - V - k * dS * b
        b_dot = -G[2] - dS * dq_N
        vr = -self._KP * h_r - self._KV * h_r_dot
        vN = dV * dq_N + self._gamma * dS * b - self._beta0 * (dq_N - V) + k * (d2S * dq_N * b + dS * b_dot)
        ddq_r = vr + dhref * vN + ddhref * dq_N * dq_N
        ddq_N = vN
        ddq_d = (-h[2] - G[2] - D[4] * ddq_r - D[5] * ddq_N) / D[2]
        u_d = D[0] * ddq_d + D[1] * ddq_r + D[2] * ddq_N + h[0] + G[0]
        u_r = D[1] * ddq_d + D[3] * ddq_r + D[4] * ddq_N + h[1] + G[1]
        return (u_d, u_r), (h_r, h_r_dot, b, c, sigma, 0.0)

    def rhs(self, t, x):
        q_d, q_r, q_N, dq_d, dq_r, dq_N = x
        (u_d, u_r), _ = self._torque(x)
        D, h, G = _model(self._Kp, q_r, q_N, dq_r, dq_N)
        dd = _solve_sym3(D, (u_d - h[0] - G[0], u_r - h[1] - G[1], -h[2] - G[2]))
        return np.array([dq_d, dq_r, dq_N, dd[0], dd[1], dd[2]])

    __call__ = rhs

    def aux(self, x):
        """``AUX_FIELDS`` for logging."""
        q_d, q_r, q_N, dq_d, dq_r, dq_N = x
        (u_d, u_r), (h_r, h_r_dot, b, c, sigma_c, _) = self._torque(x)
        D, _, _ = _model(self._Kp, q_r, q_N, dq_r, dq_N)
        sigma = D[2] * dq_d + D[4] * dq_r + D[5] * dq_N
        p2 = self._L * (math.cos(q_N) - math.cos(q_N + q_r))
        return np.array([u_d, u_r, sigma, h_r, h_r_dot, b, c, p2, sigma_c])
