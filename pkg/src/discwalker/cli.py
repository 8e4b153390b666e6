"""``discwalker`` command line: design | simulate | stability | sweep.

Exit codes: 0 ok, 2 design infeasible, 3 simulation failure, 4 analysis failure.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import InfeasibleBoundary, NoPeriodicGait, WalkerError
from .gait import design_gait, load_gait, save_gait
from .sim import ControlContext, walk
from . import stability as stab

EXIT_OK, EXIT_DESIGN, EXIT_SIM, EXIT_ANALYSIS = 0, 2, 3, 4


def _parse_perturb(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"--perturb expects KEY=FACTOR, got {item!r}")
        out[key.strip()] = float(val)
    return out


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _gait(args, cfg):
    if args.gait:
        return load_gait(args.gait)
    return design_gait(cfg.robot, cfg.gait_request())


# subcommands -------------------------------------------------------------

def cmd_design(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    try:
        g = design_gait(cfg.robot, cfg.gait_request())
    except (NoPeriodicGait, InfeasibleBoundary) as exc:
        print(f"design failed: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    path = out / "gait.json"
    save_gait(g, path)
    print(f"residual      {g.residual:.3e}")
    print(f"delta_sigma   {g.delta_sigma:.9f}")
    print(f"sigmaN_plus   {g.sigmaN_plus:.9f}")
    print(f"V_params      {' '.join(f'{v:.9f}' for v in g.V_params)}")
    print(f"gait written  {path}")
    return EXIT_OK


def _plots(trace, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "discwalker"
    meta = {"Date": None}
    t, qN, dqN = trace.column("t"), trace.column("q_N"), trace.column("dq_N")
    paths = []

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, np.degrees(qN), lw=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("q_N [deg]")
    paths.append(out / "qN_t.svg")
    fig.tight_layout()
    fig.savefig(paths[-1], metadata=meta)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.plot(np.degrees(qN), dqN, lw=0.6)
    ax.set_xlabel("q_N [deg]")
    ax.set_ylabel("dq_N [rad/s]")
    paths.append(out / "phase.svg")
    fig.tight_layout()
    fig.savefig(paths[-1], metadata=meta)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    yn = trace.y_norms()
    ax.semilogy(np.arange(1, len(yn) + 1), np.maximum(yn, 1e-16), "o-", ms=3)
    ax.set_xlabel("impact")
    ax.set_ylabel("||y|| before impact")
    paths.append(out / "ynorm.svg")
    fig.tight_layout()
    fig.savefig(paths[-1], metadata=meta)
    plt.close(fig)
    return paths


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    try:
        g = _gait(args, cfg)
    except (NoPeriodicGait, InfeasibleBoundary) as exc:
        print(f"design failed: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    sim_cfg = cfg.sim_config(args.steps, _parse_perturb(args.perturb))
    ctx = ControlContext(cfg.robot, g, cfg.gains)
    try:
        trace = walk(cfg.robot, ctx, sim_cfg)
    except WalkerError as exc:
        print(f"simulation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIM
    trace.write_csv(out / "trace.csv")
    _plots(trace, out)
    last = trace.rows[-1]
    lines = ["impact  t_s            ||y||"]
    lines += [f"{e.step_index + 1:6d}  {e.t:.9f}  {np.linalg.norm(e.y_minus):.6e}" for e in trace.impacts]
    lines.append(f"final disc speed dq_d = {last[5]:.9f} rad/s")
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def _report(args_tuple):
    robot, g, gains, full = args_tuple
    ctx = ControlContext(robot, g, gains)
    return stab.stability_report(robot, ctx, numeric=full, measure=full)


def cmd_stability(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    try:
        g = _gait(args, cfg)
    except (NoPeriodicGait, InfeasibleBoundary) as exc:
        print(f"design failed: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    try:
        base = _report((cfg.robot, g, cfg.gains, True))
        rows = [base] + [_report((cfg.robot, g, gn, False)) for gn in cfg.gain_grid() if cfg.sweep]
    except WalkerError as exc:
        print(f"analysis failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    (out / "stability.txt").write_text(base.to_text())
    (out / "stability.csv").write_text(stab.reports_to_csv(rows))
    print(base.to_text(), end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    try:
        g = _gait(args, cfg)
    except (NoPeriodicGait, InfeasibleBoundary) as exc:
        print(f"design failed: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    jobs = [(cfg.robot, g, gn, False) for gn in cfg.gain_grid()]
    try:
        if len(jobs) > 1 and args.jobs != 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_report, jobs))
        else:
            rows = [_report(j) for j in jobs]
    except WalkerError as exc:
        print(f"analysis failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    text = stab.reports_to_csv(rows)
    (out / "sweep.csv").write_text(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="discwalker", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, gait=True):
        p.add_argument("--config", help="experiment YAML (defaults used when omitted)")
        p.add_argument("--out", help="output directory (overrides config)")
        if gait:
            p.add_argument("--gait", help="gait JSON from 'design' (designed on the fly when omitted)")

    p = sub.add_parser("design", help="design the periodic gait and write gait.json")
    common(p, gait=False)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="walk and write trace.csv, summary.txt and SVG plots")
    common(p)
    p.add_argument("--steps", type=int, help="number of steps (overrides config)")
    p.add_argument("--perturb", action="append", metavar="KEY=FACTOR", help="plant parameter factor, repeatable")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", help="linearized return map report (+ sweep rows from config)")
    common(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("sweep", help="spectral radius over the config gain grid")
    common(p)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (argparse.ArgumentTypeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
