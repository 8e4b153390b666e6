"""Experiment configuration (YAML).

Angles are degrees in the file and radians everywhere else; the conversion
happens only in the ``to_*`` builders below, so a parsed config serializes
back to exactly the same values.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .controller import Gains
from .dynamics import RobotParams
from .gait import GaitRequest
from .sim import SimConfig


@dataclass(frozen=True)
class GaitBlock:
    qN_minus_deg: float = 15.0
    qr_minus_deg: float = -30.0
    end_slope: float = -1.0
    bezier_mid_deg: float = math.degrees(-0.8)
    V_a2: float = -0.4
    n_nodes: int = 201
    margin: float = 0.2


@dataclass(frozen=True)
class SimBlock:
    q0_deg: tuple = (0.0, -20.0, -10.0)  # (q_d, q_r, q_N)
    dq0_deg_s: tuple = (0.0, 0.0, 0.0)
    steps: int = 15
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step_duration: float = 4.0
    sample_dt: float = 1e-3
    param_error: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    robot: RobotParams = field(default_factory=RobotParams)
    gait: GaitBlock = field(default_factory=GaitBlock)
    gains: Gains = field(default_factory=Gains)
    sim: SimBlock = field(default_factory=SimBlock)
    sweep: dict = field(default_factory=dict)  # gain name -> list of values
    out: str = "out"

    # builders --------------------------------------------------------------
    def gait_request(self) -> GaitRequest:
        b = self.gait
        return GaitRequest(
            qN_minus=math.radians(b.qN_minus_deg),
            qr_minus=math.radians(b.qr_minus_deg),
            end_slope=b.end_slope,
            bezier_mid=math.radians(b.bezier_mid_deg),
            V_a2=b.V_a2,
            n_nodes=b.n_nodes,
            margin=b.margin,
        )

    def sim_config(self, steps: int | None = None, extra_errors: dict | None = None) -> SimConfig:
        s = self.sim
        errors = dict(s.param_error)
        errors.update(extra_errors or {})
        return SimConfig(
            q0=tuple(math.radians(v) for v in s.q0_deg),
            dq0=tuple(math.radians(v) for v in s.dq0_deg_s),
            steps=steps if steps is not None else s.steps,
            rtol=s.rtol,
            atol=s.atol,
            max_step_duration=s.max_step_duration,
            sample_dt=s.sample_dt,
            param_error=errors,
        )

    def gain_grid(self) -> list[Gains]:
        """Cartesian product of the sweep lists; unspecified gains keep their base value."""
        names = [f.name for f in fields(Gains)]
        unknown = set(self.sweep) - set(names)
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        if not self.sweep:
            return [self.gains]
        axes = [self.sweep.get(n, [getattr(self.gains, n)]) for n in names]
        return [Gains(*combo) for combo in itertools.product(*axes)]

    # (de)serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["sim"]["q0_deg"] = list(self.sim.q0_deg)
        d["sim"]["dq0_deg_s"] = list(self.sim.dq0_deg_s)
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> ExperimentConfig:
        d = dict(d or {})
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        sim = dict(d.get("sim") or {})
        for key in ("q0_deg", "dq0_deg_s"):
            if key in sim:
                sim[key] = tuple(float(v) for v in sim[key])
        return cls(
            robot=RobotParams(**(d.get("robot") or {})),
            gait=GaitBlock(**(d.get("gait") or {})),
            gains=Gains(**(d.get("gains") or {})),
            sim=SimBlock(**sim),
            sweep={k: [float(v) for v in vals] for k, vals in (d.get("sweep") or {}).items()},
            out=str(d.get("out", "out")),
        )

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> ExperimentConfig:
        return cls.from_dict(yaml.safe_load(text))


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.loads(Path(path).read_text())


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(cfg.dumps())
