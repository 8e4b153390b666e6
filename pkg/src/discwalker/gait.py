"""Nominal step synthesis.

A step is parameterized by the stance angle ``q_N`` running from ``qN_plus``
to ``qN_minus``. Three profiles are designed:

* ``href(q_N)``: degree-4 Bezier shape the inter-leg angle should follow,
* ``V(q_N) = theta (1 + a1 s + a2 s^2)``: stance-angle speed, ``s`` in [-1, 1],
* ``S(q_N)``: stance-foot momentum obtained by integrating ``k2 / V``.

Endpoint slopes of ``href`` and the coefficient ``a1`` are fixed by requiring
that the impact map sends the nominal pre-impact state back onto the profiles;
``theta`` is then chosen so the momentum lost at impact is regained by gravity
over the step.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import BPoly, PPoly

from .dynamics import QN, QR, RobotParams, State, gravity_vector, mass_matrix, _lumped
from .errors import InfeasibleBoundary, NoPeriodicGait, OutOfRange, QuadratureFailure
from .impact import apply_impact, delta_omega, delta_q, swing_foot_height

QUAD_TOL = 1e-10
F2_STEP = 1e-6
BEZIER_DEGREE = 4


@dataclass(frozen=True)
class GaitRequest:
    """Step geometry and shape knobs (radians)."""

    qN_minus: float = math.radians(15.0)
    qr_minus: float = math.radians(-30.0)
    end_slope: float = -1.0
    bezier_mid: float = -0.8
    V_a2: float = -0.4
    n_nodes: int = 201
    theta_bracket: tuple[float, float] = (0.01, 50.0)
    margin: float = 0.2


@dataclass(frozen=True)
class BoundaryData:
    q_bar_plus: np.ndarray
    q_bar_minus: np.ndarray
    slope_plus: float
    slope_minus: float
    speed_ratio: float  # dq_N+ / dq_N- on the virtual constraint
    momentum_gain: float  # (sigma+ - sigma-) / dq_N-, independent of sigma-
    delta_omega: np.ndarray

    def delta_sigma(self, V_minus: float) -> float:
        """Momentum lost at the nominal impact for pre-impact speed ``V_minus``."""
        return -self.momentum_gain * V_minus


@dataclass(frozen=True)
class STable:
    q: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    d2S: np.ndarray


@dataclass(frozen=True)
class GaitSpec:
    qN_plus: float
    qN_minus: float
    q_bar_plus: np.ndarray
    q_bar_minus: np.ndarray
    href_coeffs: np.ndarray
    V_params: np.ndarray  # (theta, a1, a2)
    S_table: STable
    delta_sigma: float
    sigmaN_plus: float
    margin: float = 0.2
    residual: float = 0.0
    _S_pp: PPoly = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = self.S_table
        yi = np.column_stack([t.S, t.dS, t.d2S])
        # quintic Hermite: C2, exact S and S' at every node
        bp = BPoly.from_derivatives(t.q, yi)
        object.__setattr__(self, "_S_pp", PPoly.from_bernstein_basis(bp))

    @property
    def step_length(self) -> float:
        return self.qN_minus - self.qN_plus

    def _check(self, q_N: float) -> None:
        pad = self.margin * self.step_length
        if not (self.qN_plus - pad <= q_N <= self.qN_minus + pad):
            raise OutOfRange(f"q_N = {q_N:.6f} outside gait domain")

    def href(self, q_N: float):
        """``(href, dhref/dq_N, d2href/dq_N2)``."""
        self._check(q_N)
        return bezier_eval(self.href_coeffs, self.qN_plus, self.qN_minus, q_N)

    def V(self, q_N: float):
        """``(V, dV/dq_N)``."""
        self._check(q_N)
        return speed_eval(self.V_params, self.qN_plus, self.qN_minus, q_N)

    def S(self, q_N: float):
        """``(S, dS/dq_N, d2S/dq_N2)`` from the quintic Hermite interpolant."""
        self._check(q_N)
        pp = self._S_pp
        return float(pp(q_N)), float(pp(q_N, 1)), float(pp(q_N, 2))

    @property
    def S_ppoly(self) -> PPoly:
        return self._S_pp

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        t = self.S_table
        return {
            "format": "discwalker-gait/1",
            "qN_plus": self.qN_plus,
            "qN_minus": self.qN_minus,
            "q_bar_plus": list(map(float, self.q_bar_plus)),
            "q_bar_minus": list(map(float, self.q_bar_minus)),
            "href_coeffs": list(map(float, self.href_coeffs)),
            "V_params": list(map(float, self.V_params)),
            "delta_sigma": self.delta_sigma,
            "sigmaN_plus": self.sigmaN_plus,
            "margin": self.margin,
            "residual": self.residual,
            "S_table": {
                "q": list(map(float, t.q)),
                "S": list(map(float, t.S)),
                "dS": list(map(float, t.dS)),
                "d2S": list(map(float, t.d2S)),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> GaitSpec:
        t = d["S_table"]
        return cls(
            qN_plus=float(d["qN_plus"]),
            qN_minus=float(d["qN_minus"]),
            q_bar_plus=np.array(d["q_bar_plus"], dtype=float),
            q_bar_minus=np.array(d["q_bar_minus"], dtype=float),
            href_coeffs=np.array(d["href_coeffs"], dtype=float),
            V_params=np.array(d["V_params"], dtype=float),
            S_table=STable(*(np.array(t[k], dtype=float) for k in ("q", "S", "dS", "d2S"))),
            delta_sigma=float(d["delta_sigma"]),
            sigmaN_plus=float(d["sigmaN_plus"]),
            margin=float(d.get("margin", 0.2)),
            residual=float(d.get("residual", 0.0)),
        )


def save_gait(g: GaitSpec, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=1) + "\n")


def load_gait(path) -> GaitSpec:
    return GaitSpec.from_dict(json.loads(Path(path).read_text()))


# profile evaluation ------------------------------------------------------

def bezier_eval(coeffs, q_plus: float, q_minus: float, q_N: float):
    delta = q_minus - q_plus
    s = (q_N - q_plus) / delta
    c = np.asarray(coeffs, dtype=float)
    n = len(c) - 1
    k = np.arange(n + 1)
    basis = np.array([math.comb(n, i) for i in k]) * s**k * (1 - s) ** (n - k)
    h = float(basis @ c)
    d1 = np.diff(c)
    k1 = np.arange(n)
    b1 = np.array([math.comb(n - 1, i) for i in k1]) * s**k1 * (1 - s) ** (n - 1 - k1)
    dh = n * float(b1 @ d1) / delta
    d2 = np.diff(c, 2)
    k2 = np.arange(n - 1)
    b2 = np.array([math.comb(n - 2, i) for i in k2]) * s**k2 * (1 - s) ** (n - 2 - k2)
    ddh = n * (n - 1) * float(b2 @ d2) / delta**2
    return h, dh, ddh


def speed_eval(V_params, q_plus: float, q_minus: float, q_N: float):
    theta, a1, a2 = V_params
    delta = q_minus - q_plus
    s = 2.0 * (q_N - q_plus) / delta - 1.0
    V = theta * (1.0 + a1 * s + a2 * s * s)
    dV = theta * (a1 + 2.0 * a2 * s) * 2.0 / delta
    return float(V), float(dV)


def bezier_coefficients(q_bar_plus, q_bar_minus, slope_plus, slope_minus, mid) -> np.ndarray:
    """Degree-4 coefficients with fixed endpoint values/slopes and free middle."""
    delta = q_bar_minus[QN] - q_bar_plus[QN]
    c0, c4 = q_bar_plus[QR], q_bar_minus[QR]
    return np.array(
        [c0, c0 + slope_plus * delta / BEZIER_DEGREE, mid, c4 - slope_minus * delta / BEZIER_DEGREE, c4]
    )


# momentum pieces ---------------------------------------------------------

def _k2_config(p: RobotParams, q_r: float, q_N: float) -> float:
    return float(-gravity_vector(p, q_r, q_N)[QN])


def k2(p: RobotParams, g: GaitSpec, h_r: float, q_N: float) -> float:
    """``-G_N`` at ``q_r = h_r + href(q_N)``."""
    h, _, _ = g.href(q_N)
    return _k2_config(p, h_r + h, q_N)


def f2(p: RobotParams, g: GaitSpec, q_N: float) -> float:
    """``d k2 / d h_r`` at ``h_r = 0`` by central differences."""
    return (k2(p, g, F2_STEP, q_N) - k2(p, g, -F2_STEP, q_N)) / (2.0 * F2_STEP)


def _k2_nominal_and_slope(p: RobotParams, coeffs, q_plus, q_minus, q_N):
    """``k2(0, q_N)`` and its total derivative along the reference shape."""
    h, dh, _ = bezier_eval(coeffs, q_plus, q_minus, q_N)
    _, _, e = _lumped(p)
    swing = p.m_l * p.l_c
    th2 = q_N + h
    val = p.g * (e * math.sin(q_N) - swing * math.sin(th2))
    slope = p.g * (e * math.cos(q_N) - swing * math.cos(th2) * (1.0 + dh))
    return val, slope


def _quad(f, a, b):
    val, err, *rest = quad(f, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200, full_output=1)
    # a fourth return value is only present when quad flags a problem
    if len(rest) > 1 and err > 10 * QUAD_TOL * max(1.0, abs(val)):
        raise QuadratureFailure(f"quad error estimate {err:.2e} on [{a}, {b}]: {rest[1]}")
    return val


def build_S(
    p: RobotParams,
    href_coeffs,
    qN_plus: float,
    qN_minus: float,
    V_params,
    sigmaN_plus: float,
    n_nodes: int = 201,
) -> STable:
    """Tabulate ``S``, ``S'`` and ``S''`` on ``n_nodes`` uniform nodes."""
    if n_nodes < 201:
        raise ValueError("need at least 201 nodes")

    def integrand(t):
        k, _ = _k2_nominal_and_slope(p, href_coeffs, qN_plus, qN_minus, t)
        V, _ = speed_eval(V_params, qN_plus, qN_minus, t)
        return k / V

    nodes = np.linspace(qN_plus, qN_minus, n_nodes)
    S = np.empty(n_nodes)
    dS = np.empty(n_nodes)
    d2S = np.empty(n_nodes)
    acc = sigmaN_plus
    for i, t in enumerate(nodes):
        if i:
            acc += _quad(integrand, nodes[i - 1], t)
        S[i] = acc
        k, dk = _k2_nominal_and_slope(p, href_coeffs, qN_plus, qN_minus, t)
        V, dV = speed_eval(V_params, qN_plus, qN_minus, t)
        if V <= 0.0:
            raise NoPeriodicGait("speed profile not positive")
        dS[i] = k / V
        d2S[i] = (dk * V - k * dV) / V**2
    return STable(nodes, S, dS, d2S)


# boundary constraints and design -----------------------------------------

def solve_boundary_constraints(
    p: RobotParams, qN_plus: float, qN_minus: float, q_bar_minus, end_slope: float = -1.0
) -> BoundaryData:
    q_bar_minus = np.asarray(q_bar_minus, dtype=float)
    if not qN_plus < qN_minus or abs(q_bar_minus[QR]) < 1e-9:
        raise InfeasibleBoundary("zero or negative step length")
    if abs(swing_foot_height(p, q_bar_minus)) > 1e-9:
        raise InfeasibleBoundary("pre-impact configuration is not on the ground")
    if abs(q_bar_minus[QN] - qN_minus) > 1e-12:
        raise InfeasibleBoundary("q_bar_minus inconsistent with qN_minus")
    q_bar_plus = delta_q() @ q_bar_minus
    if abs(q_bar_plus[QN] - qN_plus) > 1e-9:
        raise InfeasibleBoundary(
            f"relabeled stance angle {q_bar_plus[QN]:.6f} differs from qN_plus {qN_plus:.6f}"
        )
    Dw = delta_omega(p, q_bar_minus[QR], q_bar_minus[QN])
    # on the constraint: (dq_r, dq_N)- = dq_N- * (slope_minus, 1); sigma- drops out
    post = Dw[1:, 1:] @ np.array([end_slope, 1.0])
    if abs(post[1]) < 1e-9:
        raise InfeasibleBoundary("post-impact stance speed vanishes")
    if post[1] < 0.0:
        raise InfeasibleBoundary("impact reverses the stance speed")
    return BoundaryData(
        q_bar_plus=q_bar_plus,
        q_bar_minus=q_bar_minus,
        slope_plus=float(post[0] / post[1]),
        slope_minus=float(end_slope),
        speed_ratio=float(post[1]),
        momentum_gain=float(Dw[0, 1] * end_slope + Dw[0, 2]),
        delta_omega=Dw,
    )


def _sigma_plus(p: RobotParams, bd: BoundaryData, V_plus: float) -> float:
    """Momentum at step start with the disc at rest relative to the bisector."""
    DN = mass_matrix(p, bd.q_bar_plus[QR])[QN]
    return float(DN @ np.array([0.0, bd.slope_plus * V_plus, V_plus]))


def design_gait(p: RobotParams, req: GaitRequest = GaitRequest()) -> GaitSpec:
    """Run the full boundary -> shape -> speed-scale pipeline."""
    qN_minus = req.qN_minus
    q_bar_minus = np.array([0.0, req.qr_minus, qN_minus])
    qN_plus = qN_minus + req.qr_minus
    bd = solve_boundary_constraints(p, qN_plus, qN_minus, q_bar_minus, req.end_slope)
    coeffs = bezier_coefficients(bd.q_bar_plus, q_bar_minus, bd.slope_plus, bd.slope_minus, req.bezier_mid)

    lam, a2 = bd.speed_ratio, req.V_a2
    a1 = (1.0 + a2) * (1.0 - lam) / (1.0 + lam)
    s = np.linspace(-1.0, 1.0, 1001)
    if np.min(1.0 + a1 * s + a2 * s * s) <= 0.0:
        raise NoPeriodicGait("speed shape is not positive on the step")

    def gain_over_step(theta):
        Vp = (theta, a1, a2)

        def integrand(t):
            k, _ = _k2_nominal_and_slope(p, coeffs, qN_plus, qN_minus, t)
            return k / speed_eval(Vp, qN_plus, qN_minus, t)[0]

        return _quad(integrand, qN_plus, qN_minus)

    def residual(theta):
        Vp = (theta, a1, a2)
        V_plus = speed_eval(Vp, qN_plus, qN_minus, qN_plus)[0]
        V_minus = speed_eval(Vp, qN_plus, qN_minus, qN_minus)[0]
        sig_plus = _sigma_plus(p, bd, V_plus)
        gain = gain_over_step(theta)
        sig_minus = sig_plus + gain
        pre = State(q_bar_minus, [sig_minus, bd.slope_minus * V_minus, V_minus])
        post = apply_impact(p, pre, strict=False).post_state
        return gain - (sig_minus - post.omega[0])

    theta = _find_scale(residual, *req.theta_bracket)
    r = residual(theta)
    if not abs(r) < 1e-9:
        raise NoPeriodicGait(f"residual {r:.3e} after root finding")
    Vp = np.array([theta, a1, a2])
    V_plus = speed_eval(Vp, qN_plus, qN_minus, qN_plus)[0]
    V_minus = speed_eval(Vp, qN_plus, qN_minus, qN_minus)[0]
    sig_plus = _sigma_plus(p, bd, V_plus)
    table = build_S(p, coeffs, qN_plus, qN_minus, Vp, sig_plus, req.n_nodes)
    gait = GaitSpec(
        qN_plus=qN_plus,
        qN_minus=qN_minus,
        q_bar_plus=bd.q_bar_plus,
        q_bar_minus=q_bar_minus,
        href_coeffs=coeffs,
        V_params=Vp,
        S_table=table,
        delta_sigma=bd.delta_sigma(V_minus),
        sigmaN_plus=sig_plus,
        margin=req.margin,
        residual=float(table.S[-1] - table.S[0] - bd.delta_sigma(V_minus)),
    )
    return gait


def _find_scale(residual, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Bracket on a log grid, bisect, then polish with the secant method."""
    grid = np.geomspace(lo, hi, 64)
    vals = [residual(t) for t in grid]
    bracket = None
    for (t0, r0), (t1, r1) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if r0 == 0.0:
            return float(t0)
        if np.sign(r0) != np.sign(r1):
            bracket = (t0, r0, t1, r1)
            break
    if bracket is None:
        raise NoPeriodicGait("momentum balance residual has no sign change")
    a, ra, b, rb = bracket
    while b - a > 1e-4 * a:
        m = 0.5 * (a + b)
        rm = residual(m)
        if np.sign(rm) == np.sign(ra):
            a, ra = m, rm
        else:
            b, rb = m, rm
    x0, r0, x1, r1 = a, ra, b, rb
    for _ in range(50):
        if r1 == r0:
            break
        x2 = x1 - r1 * (x1 - x0) / (r1 - r0)
        x0, r0 = x1, r1
        x1, r1 = x2, residual(x2)
        if abs(x1 - x0) < tol * abs(x1) or abs(r1) < 1e-13:
            break
    return float(x1)
