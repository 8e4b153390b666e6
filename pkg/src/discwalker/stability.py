"""Local stability of the periodic gait.

Near the gait, the output error ``y = (h_r, dh_r, b, c)`` obeys a linear
system when parameterized by the stance angle,

    dy/dq_N = Xi(q_N) y,

whose transition matrix ``Phi`` has a closed form in the time-like variable
``zeta = int 1/V`` and the momentum variable ``psi = int S'^2/V``. Composing
``Phi`` with the linearized impact gives the step-to-step map ``P_bar``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .controller import Gains, bc_coords, state_from_y_on_guard
from .dynamics import RobotParams, State, omega_from_vel, vel_from_omega
from .errors import (
    DegenerateGains,
    FellOver,
    IntegratorFailure,
    NoReturn,
    OutOfRange,
    QuadratureFailure,
    SpeedReversal,
    StallTimeout,
)
from .gait import GaitSpec, f2
from .impact import apply_impact
from .sim import ControlContext, SimConfig, flow_step, walk, nominal_post_impact

QUAD_TOL = 1e-10
FD_STEP_IMPACT = 1e-7
FD_STEP_RETURN = 1e-5
ALPHA_GAP = 1e-9
Y_FLOOR = 1e-10  # integrator noise level of per-impact ||y||


def _quad(f, a, b):
    if a == b:
        return 0.0
    val, err, *rest = quad(f, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400, full_output=1)
    if len(rest) > 1 and err > 10 * QUAD_TOL * max(1.0, abs(val)):
        raise QuadratureFailure(f"error estimate {err:.2e} on [{a}, {b}]")
    return val


def zeta_psi(g: GaitSpec, q_N: float) -> tuple[float, float]:
    """``zeta = int 1/V`` and ``psi = int S'^2/V`` from ``qN_plus`` to ``q_N``."""
    g._check(q_N)
    a = g.qN_plus
    zeta = _quad(lambda t: 1.0 / g.V(t)[0], a, q_N)
    psi = _quad(lambda t: g.S(t)[1] ** 2 / g.V(t)[0], a, q_N)
    return zeta, psi


def alphas(gains: Gains) -> tuple[complex, complex]:
    """Decay rates of ``h'' + K_V h' + K_P h = 0``: roots of ``s^2 - K_V s + K_P``."""
    disc = complex(gains.K_V**2 - 4.0 * gains.K_P)
    r = np.sqrt(disc)
    a1, a2 = 0.5 * (gains.K_V + r), 0.5 * (gains.K_V - r)
    if abs(a1 - a2) < ALPHA_GAP:
        raise DegenerateGains(f"K_V^2 = 4 K_P (K_P={gains.K_P}, K_V={gains.K_V}); repeated root")
    return complex(a1), complex(a2)


def _real(z: complex) -> float:
    if abs(z.imag) > 1e-10 * max(1.0, abs(z.real)):
        raise ArithmeticError(f"imaginary residue {z.imag:.3e}")
    return z.real


def _hr_block(a1: complex, a2: complex, zeta: float) -> np.ndarray:
    """Transition matrix of ``(h_r, dh_r)`` after ``zeta``."""
    e1, e2 = np.exp(-a1 * zeta), np.exp(-a2 * zeta)
    d = a1 - a2
    return np.array(
        [
            [_real((a1 * e2 - a2 * e1) / d), _real((e2 - e1) / d)],
            [_real(a1 * a2 * (e1 - e2) / d), _real((a1 * e1 - a2 * e2) / d)],
        ]
    )


@dataclass(frozen=True)
class PhiEntries:
    g_pp: float
    g_pv: float
    g_vp: float
    g_vv: float
    g_bp: float
    g_bv: float
    g_bb: float
    g_bc: float
    g_cc: float
    alpha1: complex
    alpha2: complex
    zeta: float
    psi: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.g_pp, self.g_pv, 0.0, 0.0],
                [self.g_vp, self.g_vv, 0.0, 0.0],
                [self.g_bp, self.g_bv, self.g_bb, self.g_bc],
                [0.0, 0.0, 0.0, self.g_cc],
            ]
        )


class _Profiles:
    """Cached ``zeta``/``psi`` along the step so nested integrals stay cheap.

    ``zeta`` and ``psi`` are integrated to the quadrature tolerance on a dense
    grid and refined inside each cell by one more adaptive integral.
    """

    def __init__(self, g: GaitSpec, n: int = 401):
        self.g = g
        lo = g.qN_plus - g.margin * g.step_length
        hi = g.qN_minus + g.margin * g.step_length
        self.grid = np.linspace(lo, hi, n)
        i0 = int(np.searchsorted(self.grid, g.qN_plus))
        self.grid = np.insert(self.grid, i0, g.qN_plus) if self.grid[i0] != g.qN_plus else self.grid
        self.i0 = int(np.searchsorted(self.grid, g.qN_plus))
        z = np.zeros(len(self.grid))
        s = np.zeros(len(self.grid))
        for i in range(self.i0 + 1, len(self.grid)):
            dz, ds = self._cell(self.grid[i - 1], self.grid[i])
            z[i], s[i] = z[i - 1] + dz, s[i - 1] + ds
        for i in range(self.i0 - 1, -1, -1):
            dz, ds = self._cell(self.grid[i + 1], self.grid[i])
            z[i], s[i] = z[i + 1] + dz, s[i + 1] + ds
        self.z, self.s = z, s

    def _cell(self, a, b):
        g = self.g
        return (
            _quad(lambda t: 1.0 / g.V(t)[0], a, b),
            _quad(lambda t: g.S(t)[1] ** 2 / g.V(t)[0], a, b),
        )

    def __call__(self, q):
        i = int(np.clip(np.searchsorted(self.grid, q) - 1, 0, len(self.grid) - 2))
        # integrate from the nearer cell end
        if q - self.grid[i] <= self.grid[i + 1] - q:
            dz, ds = self._cell(self.grid[i], q)
            return self.z[i] + dz, self.s[i] + ds
        dz, ds = self._cell(self.grid[i + 1], q)
        return self.z[i + 1] + dz, self.s[i + 1] + ds


def phi_y(p: RobotParams, g: GaitSpec, gains: Gains, q_end: float | None = None, profiles=None) -> PhiEntries:
    """Closed-form transition matrix from ``qN_plus`` to ``q_end`` (default ``qN_minus``)."""
    q_end = g.qN_minus if q_end is None else q_end
    a1, a2 = alphas(gains)
    k = gains.ratio
    prof = profiles or _Profiles(g)
    zeta, psi = prof(q_end)
    H = _hr_block(a1, a2, zeta)

    def weight(t):
        # exp(-k (psi(q_end) - psi(t))), kept bounded for large k
        z, s = prof(t)
        return math.exp(k * (s - psi)), z

    def bp(t):
        w, z = weight(t)
        return w * _hr_block(a1, a2, z)[0, 0] * f2(p, g, t) / g.V(t)[0]

    def bv(t):
        w, z = weight(t)
        return w * _hr_block(a1, a2, z)[0, 1] * f2(p, g, t) / g.V(t)[0]

    def bc(t):
        w, z = weight(t)
        return w * math.exp(-gains.beta0 * z) * g.S(t)[1] / g.V(t)[0]

    a = g.qN_plus
    return PhiEntries(
        g_pp=H[0, 0],
        g_pv=H[0, 1],
        g_vp=H[1, 0],
        g_vv=H[1, 1],
        g_bp=_quad(bp, a, q_end),
        g_bv=_quad(bv, a, q_end),
        g_bb=math.exp(-k * psi),
        g_bc=-_quad(bc, a, q_end),
        g_cc=math.exp(-gains.beta0 * zeta),
        alpha1=a1,
        alpha2=a2,
        zeta=zeta,
        psi=psi,
    )


def xi_matrix(p: RobotParams, g: GaitSpec, gains: Gains, q_N: float) -> np.ndarray:
    """Coefficient of the linearized error dynamics in ``q_N``."""
    V = g.V(q_N)[0]
    dS = g.S(q_N)[1]
    k = gains.ratio
    return (
        np.array(
            [
                [0.0, 1.0, 0.0, 0.0],
                [-gains.K_P, -gains.K_V, 0.0, 0.0],
                [f2(p, g, q_N), 0.0, -k * dS * dS, -dS],
                [0.0, 0.0, 0.0, -gains.beta0],
            ]
        )
        / V
    )


def phi_numeric(p: RobotParams, g: GaitSpec, gains: Gains, q_end: float | None = None,
                rtol: float = 1e-12, atol: float = 1e-13) -> np.ndarray:
    """Transition matrix by direct integration of ``dPhi/dq = Xi Phi``."""
    q_end = g.qN_minus if q_end is None else q_end
    if q_end == g.qN_plus:
        return np.eye(4)

    def rhs(q, x):
        return (xi_matrix(p, g, gains, q) @ x.reshape(4, 4)).ravel()

    sol = solve_ivp(rhs, (g.qN_plus, q_end), np.eye(4).ravel(), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegratorFailure(sol.message)
    return sol.y[:, -1].reshape(4, 4)


# impact and return maps ----------------------------------------------------

def impact_map_y(p: RobotParams, g: GaitSpec, gains: Gains, y_minus) -> np.ndarray:
    """Nonlinear ``y- -> y+``: place ``y-`` on the guard, apply the impact, re-measure."""
    s = state_from_y_on_guard(g, gains, y_minus)
    post = apply_impact(p, s, strict=False).post_state
    return bc_coords(g, gains, post).as_array()


def linearized_impact(p: RobotParams, g: GaitSpec, gains: Gains, step: float = FD_STEP_IMPACT) -> np.ndarray:
    """Central-difference Jacobian of :func:`impact_map_y` at ``y = 0``."""
    out = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = step
        out[:, j] = (impact_map_y(p, g, gains, e) - impact_map_y(p, g, gains, -e)) / (2.0 * step)
    return out


def poincare_numeric(plant: RobotParams, ctx: ControlContext, y0, cfg: SimConfig | None = None, kernel=None) -> np.ndarray:
    """Pre-impact ``y`` one step after the pre-impact error ``y0``."""
    cfg = cfg or SimConfig(steps=1, rtol=1e-12, atol=1e-13)
    kernel = kernel or ctx.kernel(plant)
    s = state_from_y_on_guard(ctx.gait, ctx.gains, y0)
    # the state is physical: express it in plant velocities, then impact
    dq = vel_from_omega(ctx.params, s.q, s.omega)
    res = apply_impact(plant, State(s.q, omega_from_vel(plant, s.q, dq)), strict=False)
    post = res.post_state
    x = np.concatenate([post.q, vel_from_omega(plant, post.q, post.omega)])
    try:
        _, x_minus = flow_step(plant, kernel, x, 0.0, cfg, None, 0, ctx.gait)
    except (FellOver, StallTimeout, SpeedReversal, OutOfRange, IntegratorFailure) as exc:
        raise NoReturn(f"no further impact: {exc}") from exc
    return np.asarray(kernel.aux(x_minus)[3:7])


def poincare_jacobian(plant: RobotParams, ctx: ControlContext, step: float = FD_STEP_RETURN) -> np.ndarray:
    cfg = SimConfig(steps=1, rtol=1e-12, atol=1e-13)
    kernel = ctx.kernel(plant)
    out = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = step
        out[:, j] = (poincare_numeric(plant, ctx, e, cfg, kernel) - poincare_numeric(plant, ctx, -e, cfg, kernel)) / (2 * step)
    return out


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def contraction_ratios(plant: RobotParams, ctx: ControlContext, y0=None, steps: int = 8) -> np.ndarray:
    """Per-impact ``||y_k+1|| / ||y_k||`` from a simulated walk, above the noise floor.

    The walk starts one impact before the nominal post-impact point, displaced
    by ``y0`` (default ``1e-3`` along every output).
    """
    y0 = np.full(4, 1e-3) if y0 is None else np.asarray(y0, dtype=float)
    s = state_from_y_on_guard(ctx.gait, ctx.gains, y0)
    q = s.q
    post = apply_impact(ctx.params, s, strict=False).post_state
    x0 = np.concatenate([post.q, vel_from_omega(plant, post.q, omega_from_vel(plant, post.q, vel_from_omega(ctx.params, post.q, post.omega)))])
    tr = walk(plant, ctx, SimConfig(steps=steps, sample_dt=0.05), x0=x0)
    n = np.concatenate([[np.linalg.norm(y0)], tr.y_norms()])
    ratios = []
    for a, b in zip(n, n[1:]):
        if a <= Y_FLOOR or b <= Y_FLOOR:
            break
        ratios.append(b / a)
    return np.array(ratios)


def geometric_mean(r) -> float:
    r = np.asarray(r, dtype=float)
    return float(np.exp(np.mean(np.log(r)))) if r.size else float("nan")


@dataclass
class StabilityReport:
    gains: Gains
    eigenvalues: np.ndarray
    spectral_radius: float
    stable: bool
    numeric_spectral_radius: float | None = None
    numeric_rel_error: float | None = None
    contraction: np.ndarray = field(default_factory=lambda: np.zeros(0))
    P_bar: np.ndarray | None = None

    def to_text(self) -> str:
        lines = [
            f"gains          K_P={self.gains.K_P:g} K_V={self.gains.K_V:g} beta0={self.gains.beta0:g} gamma={self.gains.gamma:g}",
            "eigenvalues    " + ", ".join(f"{z.real:+.6e}{z.imag:+.6e}j" for z in self.eigenvalues),
            f"spectral_rad   {self.spectral_radius:.6e}",
            f"stable         {'yes' if self.stable else 'no'}",
        ]
        if self.numeric_spectral_radius is not None:
            lines.append(f"numeric_rho    {self.numeric_spectral_radius:.6e} (rel. diff {self.numeric_rel_error:.3e})")
        if self.contraction.size:
            lines.append("contraction    " + " ".join(f"{r:.4e}" for r in self.contraction))
            lines.append(f"mean_ratio     {geometric_mean(self.contraction):.6e}")
        if self.P_bar is not None:
            lines.append("P_bar")
            lines += ["  " + " ".join(f"{v:+.6e}" for v in row) for row in self.P_bar]
        return "\n".join(lines) + "\n"

    def csv_row(self) -> dict:
        return {
            "K_P": self.gains.K_P,
            "K_V": self.gains.K_V,
            "beta0": self.gains.beta0,
            "gamma": self.gains.gamma,
            "spectral_radius": f"{self.spectral_radius:.9e}",
            "stable": int(self.stable),
            "numeric_spectral_radius": "" if self.numeric_spectral_radius is None else f"{self.numeric_spectral_radius:.9e}",
            "mean_contraction": "" if not self.contraction.size else f"{geometric_mean(self.contraction):.9e}",
            "eigenvalues": ";".join(f"{z.real:.9e}{z.imag:+.9e}j" for z in self.eigenvalues),
        }


CSV_FIELDS = (
    "K_P", "K_V", "beta0", "gamma", "spectral_radius", "stable",
    "numeric_spectral_radius", "mean_contraction", "eigenvalues",
)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def linear_return_map(p: RobotParams, g: GaitSpec, gains: Gains) -> np.ndarray:
    """``P_bar = Phi(qN_minus, qN_plus) Delta_bar``."""
    return phi_y(p, g, gains).matrix @ linearized_impact(p, g, gains)


def stability_report(plant: RobotParams, ctx: ControlContext, numeric: bool = True, measure: bool = True) -> StabilityReport:
    """Eigen-analysis of the linearized return map, optionally cross-checked by simulation."""
    P = linear_return_map(ctx.params, ctx.gait, ctx.gains)
    eig = np.linalg.eigvals(P)
    rho = float(np.max(np.abs(eig)))
    rep = StabilityReport(ctx.gains, eig, rho, rho < 1.0, P_bar=P)
    if numeric:
        rn = spectral_radius(poincare_jacobian(plant, ctx))
        rep.numeric_spectral_radius = rn
        rep.numeric_rel_error = abs(rn - rho) / max(rho, 1e-300)
    if measure:
        rep.contraction = contraction_ratios(plant, ctx)
    return rep
