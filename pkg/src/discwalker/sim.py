"""Event-driven simulation of the closed-loop walker.

Each step integrates the closed-loop vector field with DOP853 until the swing
foot reaches the ground, localizes the touchdown by bisection on the dense
output and applies the impact map. The plant may run with perturbed constants
while the controller keeps its nominal model.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.integrate import DOP853

from .controller import Gains, YState, state_from_y
from .dynamics import RobotParams, State, omega_from_vel, perturb_params, total_energy, accelerations, vel_from_omega
from .errors import FellOver, IntegratorFailure, OutOfRange, SpeedReversal, StallTimeout
from .gait import GaitSpec
from .impact import GUARD_EPS, apply_impact
from .kernels import make_kernel

TRACE_COLUMNS = (
    "t", "step_index", "q_d", "q_r", "q_N", "dq_d", "dq_r", "dq_N", "sigma_N",
    "h_r", "h_r_dot", "b", "c", "u_d", "u_r", "p2", "event",
)
FLOW, IMPACT = "flow", "impact"


@dataclass(frozen=True)
class SimConfig:
    """Walk settings. ``q0``/``dq0`` are radians and rad/s."""

    q0: tuple = (0.0, math.radians(-20.0), math.radians(-10.0))
    dq0: tuple = (0.0, 0.0, 0.0)
    steps: int = 10
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step_duration: float = 4.0
    param_error: dict = field(default_factory=dict)
    sample_dt: float = 1e-3
    max_dt: float = 0.02
    deadband: float = math.radians(2.0)
    speed_floor: float = 0.01

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.max_step_duration <= 0 or self.sample_dt <= 0 or self.max_dt <= 0:
            raise ValueError("durations must be positive")


@dataclass(frozen=True)
class ControlContext:
    """Everything the controller knows: nominal model, gait and gains."""

    params: RobotParams
    gait: GaitSpec
    gains: Gains
    backend: str | None = None

    def kernel(self, plant: RobotParams, actuated: bool = True):
        return make_kernel(plant, self.params, self.gait, self.gains, actuated, self.backend)


class ImpactEvent(NamedTuple):
    step_index: int
    t: float
    pre: np.ndarray  # (q, dq) before the reset
    post: np.ndarray
    y_minus: np.ndarray  # controller coordinates (h_r, h_r_dot, b, c)
    y_plus: np.ndarray


@dataclass
class Trace:
    rows: list = field(default_factory=list)
    events: list = field(default_factory=list)
    impacts: list = field(default_factory=list)

    def add(self, t, step, x, aux, event=FLOW):
        u_d, u_r, sigma, h_r, h_r_dot, b, c, p2, _ = aux
        self.rows.append((t, step, *x, sigma, h_r, h_r_dot, b, c, u_d, u_r, p2))
        self.events.append(event)

    @property
    def array(self) -> np.ndarray:
        """Numeric columns (all but ``event``)."""
        return np.array(self.rows, dtype=float).reshape(-1, len(TRACE_COLUMNS) - 1)

    def column(self, name: str) -> np.ndarray:
        return self.array[:, TRACE_COLUMNS.index(name)]

    def y_norms(self) -> np.ndarray:
        """Pre-impact ``||y||`` for each impact."""
        return np.array([np.linalg.norm(e.y_minus) for e in self.impacts])

    def impact_times(self) -> np.ndarray:
        return np.array([e.t for e in self.impacts])

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for row, ev in zip(self.rows, self.events):
                w.writerow([f"{row[0]:.9f}", int(row[1]), *(f"{v:.12e}" for v in row[2:]), ev])


def read_trace_csv(path):
    """Return ``(numeric array, event list)`` from a trace CSV."""
    with open(Path(path), newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError("unexpected trace header")
        rows, events = [], []
        for line in r:
            rows.append([float(v) for v in line[:-1]])
            events.append(line[-1])
    return np.array(rows), events


def nominal_post_impact(ctx: ControlContext) -> np.ndarray:
    """Post-impact point of the periodic gait as ``(q, dq)``."""
    g = ctx.gait
    s = state_from_y(g, ctx.gains, np.zeros(4), g.qN_plus)
    return np.concatenate([s.q, vel_from_omega(ctx.params, s.q, s.omega)])


def _p2(L, x):
    return L * (math.cos(x[2]) - math.cos(x[2] + x[1]))


def _p2_rate(L, x):
    return L * (-math.sin(x[2]) * x[5] + math.sin(x[2] + x[1]) * (x[5] + x[4]))


def _integrate_to(kernel, t0, x0, t1, cfg):
    solver = DOP853(kernel.rhs, t0, x0, t1, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_dt)
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise IntegratorFailure(str(msg))
    return np.array(solver.y)


def _refine_touchdown(kernel, L, t_prev, x_prev, t_hit, cfg):
    """Re-integrate onto the touchdown so the event state carries no interpolation error."""
    x = _integrate_to(kernel, t_prev, x_prev, t_hit, cfg)
    for _ in range(8):
        dt = _p2(L, x) / _p2_rate(L, x)
        if abs(dt) < 1e-14:
            break
        t_hit -= dt
        x = _integrate_to(kernel, t_prev, x_prev, t_hit, cfg)
    return t_hit, x


class _StepResult(NamedTuple):
    t: float
    x: np.ndarray


def flow_step(plant: RobotParams, kernel, x0, t0: float, cfg: SimConfig, trace: Trace | None = None,
              step_index: int = 0, gait: GaitSpec | None = None) -> _StepResult:
    """Integrate from ``x0`` to the next accepted touchdown; return the pre-impact point.

    Samples on the uniform grid ``t0 + k*sample_dt`` (k >= 1) are appended to
    ``trace``. The touchdown is localized to ``|p2| < GUARD_EPS``.
    """
    L = plant.L
    lo = hi = None
    if gait is not None:
        pad = gait.margin * gait.step_length
        lo, hi = gait.qN_plus - pad, gait.qN_minus + pad
    solver = DOP853(kernel.rhs, t0, np.asarray(x0, dtype=float), t0 + cfg.max_step_duration,
                    rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_dt)
    armed = x0[5] > cfg.speed_floor
    next_sample = 1
    t_prev, x_prev = t0, np.asarray(x0, dtype=float)
    p_prev = _p2(L, x_prev)
    while True:
        if solver.status != "running":
            raise StallTimeout(f"no touchdown within {cfg.max_step_duration} s of step start")
        msg = solver.step()
        if solver.status == "failed":
            raise IntegratorFailure(str(msg))
        t, x = solver.t, solver.y
        dense = solver.dense_output()
        p = _p2(L, x)
        crossing = p_prev > 0.0 and p <= 0.0
        t_hit = None
        if crossing:
            a, b = t_prev, t
            for _ in range(200):
                m = 0.5 * (a + b)
                pm = _p2(L, dense(m))
                if pm > 0.0:
                    a = m
                else:
                    b = m
                if abs(pm) < GUARD_EPS or b - a < 1e-15:
                    break
            t_hit = m
            if dense(t_hit)[1] >= -cfg.deadband:
                t_hit = None  # scuffing in mid-swing or foot behind: ignore
        t_end = t_hit if t_hit is not None else t
        if trace is not None:
            while t0 + next_sample * cfg.sample_dt < t_end:
                ts = t0 + next_sample * cfg.sample_dt
                xs = dense(ts)
                trace.add(ts, step_index, xs, kernel.aux(xs))
                next_sample += 1
        xs = x if t_hit is None else dense(t_hit)
        # failure checks on the accepted stretch
        q_N, dq_N = xs[2], xs[5]
        if abs(q_N) > math.pi / 2:
            raise FellOver(f"stance angle {math.degrees(q_N):.1f} deg at t = {t_end:.4f}")
        if lo is not None and not (lo <= q_N <= hi):
            raise OutOfRange(f"q_N = {q_N:.6f} left the gait domain at t = {t_end:.4f}")
        if armed and dq_N <= cfg.speed_floor:
            raise SpeedReversal(f"dq_N = {dq_N:.4f} at t = {t_end:.4f}")
        armed = armed or dq_N > cfg.speed_floor
        if t_hit is not None:
            t_hit, xs = _refine_touchdown(kernel, L, t_prev, x_prev, t_hit, cfg)
            return _StepResult(t_hit, xs)
        t_prev, x_prev, p_prev = t, np.array(x), p


def _y_of(aux) -> np.ndarray:
    return np.array(aux[3:7])


def walk(plant: RobotParams, ctx: ControlContext, cfg: SimConfig, x0=None) -> Trace:
    """Simulate ``cfg.steps`` steps; ``cfg.param_error`` scales the plant only."""
    plant = perturb_params(plant, cfg.param_error) if cfg.param_error else plant
    kernel = ctx.kernel(plant)
    x = np.concatenate([cfg.q0, cfg.dq0]).astype(float) if x0 is None else np.asarray(x0, dtype=float)
    trace = Trace()
    t = 0.0
    trace.add(t, 0, x, kernel.aux(x))
    for k in range(cfg.steps):
        t, x_minus = flow_step(plant, kernel, x, t, cfg, trace, k, ctx.gait)
        aux_minus = kernel.aux(x_minus)
        trace.add(t, k, x_minus, aux_minus, IMPACT)
        q = x_minus[:3]
        res = apply_impact(plant, State(q, omega_from_vel(plant, q, x_minus[3:])))
        post = res.post_state
        x = np.concatenate([post.q, vel_from_omega(plant, post.q, post.omega)])
        aux_plus = kernel.aux(x)
        trace.add(t, k + 1, x, aux_plus, IMPACT)
        trace.impacts.append(ImpactEvent(k, t, x_minus, x, _y_of(aux_minus), _y_of(aux_plus)))
    return trace


def y_at(kernel, x) -> YState:
    return YState(*_y_of(kernel.aux(x)))


def free_flow(plant: RobotParams, x0, duration: float = 1.0, rtol: float = 1e-10, atol: float = 1e-12,
              n_samples: int = 101):
    """Unactuated pinned flow; returns ``(t, x, energy)`` samples."""
    def rhs(_t, x):
        return np.concatenate([x[3:], accelerations(plant, x[:3], x[3:], np.zeros(2))])

    solver = DOP853(rhs, 0.0, np.asarray(x0, dtype=float), duration, rtol=rtol, atol=atol)
    ts = np.linspace(0.0, duration, n_samples)
    out = [np.asarray(x0, dtype=float)]
    i = 1
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise IntegratorFailure(str(msg))
        dense = solver.dense_output()
        while i < n_samples and ts[i] <= solver.t:
            out.append(dense(ts[i]))
            i += 1
    xs = np.array(out)
    energy = np.array([total_energy(plant, x[:3], x[3:]) for x in xs])
    return ts, xs, energy
