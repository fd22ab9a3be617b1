"""Experiment configuration files.

A config is a JSON object with five sections::

    {
      "system": {
        "node1": {"pi_good": 0.8, "eps_good": 0.2, "eps_bad": 0.2},
        "node2": {"pi_good": 0.7, "eps_good": 0.2, "eps_bad": 0.2},
        "reception": {"q1_solo": 1.0, "q1_with_bad": 0.2, "q1_with_good": 0.1,
                      "q2_solo": 0.9, "q2_with_bad": 0.2, "q2_with_good": 0.1},
        "allow_degenerate": false
      },
      "task": "compare",
      "grid": {"lambda1": [0.0, 0.3], "lambda2": [0.0, 0.3], "num": [20, 20]},
      "sim": {"horizon": 500000, "warmup": null, "seeds": [1], "policy": "cara",
              "p": [0.5, 0.5], "rates": null,
              "channel": {"mode": "iid", "persistence": []},
              "queue_cap": 1000000, "membership": "fixed_p", "band": 0.02,
              "workers": 1, "decoupled": false},
      "output": {"path": "out.csv", "format": "csv", "boundary_samples": 512}
    }

For LCQ-only experiments ``system`` may instead hold
``{"lcq_nodes": [{"pi_good": ..., "eps_good": ..., "q_solo": ...}, ...]}``.
Every section except ``system`` is optional.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .model import LcqSystemParams, SystemParams, ValidationReport, Violation, validate


class Task(str, enum.Enum):
    REGION = "region"
    ALOHA_REGION = "aloha_region"
    LCQ_REGION = "lcq_region"
    SIMULATE = "simulate"
    SWEEP = "sweep"
    COMPARE = "compare"
    DOMINANCE_CHECK = "dominance_check"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    lambda1: tuple[float, float] = (0.0, 0.3)
    lambda2: tuple[float, float] = (0.0, 0.3)
    num: tuple[int, int] = (20, 20)

    def points(self) -> list[tuple[float, float]]:
        """Row-major over lambda1, endpoints included."""
        xs = np.linspace(*self.lambda1, self.num[0]) if self.num[0] else []
        ys = np.linspace(*self.lambda2, self.num[1]) if self.num[1] else []
        return [(float(x), float(y)) for x in xs for y in ys]


@dataclass(frozen=True)
class SimSettings:
    horizon: int = 100_000
    warmup: int | None = None
    seeds: tuple[int, ...] = (0,)
    policy: str = "cara"
    p: tuple[float, float] = (0.5, 0.5)
    rates: tuple[float, ...] | None = None
    channel_mode: str = "iid"
    persistence: tuple[float, ...] = ()
    queue_cap: int = 1_000_000
    membership: str = "fixed_p"  # or "closure", "lcq"
    band: float = 0.02
    workers: int = 1
    decoupled: bool = False  # negative control for dominance checks


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "csv"
    boundary_samples: int = 512


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemParams | None = None
    lcq: LcqSystemParams | None = None
    allow_degenerate: bool = False
    task: Task = Task.REGION
    grid: GridSpec = field(default_factory=GridSpec)
    sim: SimSettings = field(default_factory=SimSettings)
    output: OutputSpec = field(default_factory=OutputSpec)

    def lcq_params(self) -> LcqSystemParams:
        if self.lcq is not None:
            return self.lcq
        if self.system is None:
            raise ConfigError("no system parameters")
        return LcqSystemParams.from_system(self.system)

    def validation(self) -> ValidationReport:
        out: list[Violation] = []
        if self.system is None and self.lcq is None:
            out.append(Violation("system", "missing node parameters"))
        if self.system is not None:
            out += validate(self.system, self.allow_degenerate).violations
        if self.lcq is not None:
            out += validate(self.lcq).violations
        g = self.grid
        for name, (lo, hi) in (("grid.lambda1", g.lambda1), ("grid.lambda2", g.lambda2)):
            if not 0.0 <= lo <= hi <= 1.0:
                out.append(Violation(name, f"range [{lo}, {hi}] must lie within [0, 1]"))
        if any(n < 0 for n in g.num):
            out.append(Violation("grid.num", "point counts must be non-negative"))
        if self.output.format not in ("csv", "json"):
            out.append(Violation("output.format", f"unknown format {self.output.format!r}"))
        if self.output.boundary_samples < 2:
            out.append(Violation("output.boundary_samples", "need at least 2"))
        s = self.sim
        if s.band < 0:
            out.append(Violation("sim.band", "must be >= 0"))
        if s.membership not in ("fixed_p", "closure", "lcq"):
            out.append(Violation("sim.membership", f"unknown membership {s.membership!r}"))
        if s.workers < 1:
            out.append(Violation("sim.workers", "must be >= 1"))
        if not s.seeds:
            out.append(Violation("sim.seeds", "at least one seed required"))
        return ValidationReport(tuple(out))

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        system: dict[str, Any] = {}
        if self.system is not None:
            system.update(self.system.to_dict())
        if self.lcq is not None:
            system["lcq_nodes"] = self.lcq.to_list()
        system["allow_degenerate"] = self.allow_degenerate
        return {
            "system": system,
            "task": self.task.value,
            "grid": _lists(asdict(self.grid)),
            "sim": _lists(asdict(self.sim)),
            "output": asdict(self.output),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        try:
            system = data["system"]
            params = SystemParams.from_dict(system) if "node1" in system else None
            lcq = LcqSystemParams.from_list(system["lcq_nodes"]) if "lcq_nodes" in system else None
            grid = data.get("grid", {})
            sim = dict(data.get("sim", {}))
            if "channel" in sim:
                ch = sim.pop("channel")
                sim["channel_mode"] = ch.get("mode", "iid")
                sim["persistence"] = ch.get("persistence", [])
            for key in ("seeds", "p", "persistence"):
                if key in sim:
                    sim[key] = tuple(sim[key])
            if sim.get("rates") is not None:
                sim["rates"] = tuple(float(x) for x in sim["rates"])
            return cls(
                system=params,
                lcq=lcq,
                allow_degenerate=bool(system.get("allow_degenerate", False)),
                task=Task(data.get("task", Task.REGION.value)),
                grid=GridSpec(
                    lambda1=tuple(grid.get("lambda1", GridSpec.lambda1)),
                    lambda2=tuple(grid.get("lambda2", GridSpec.lambda2)),
                    num=tuple(int(n) for n in grid.get("num", GridSpec.num)),
                ),
                sim=SimSettings(**sim),
                output=OutputSpec(**data.get("output", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    def with_overrides(self, **kw: Any) -> "ExperimentConfig":
        sim_kw = {k: kw.pop(k) for k in list(kw) if k in SimSettings.__dataclass_fields__ and kw[k] is not None}
        out_kw = {k: kw.pop(k) for k in list(kw) if k in OutputSpec.__dataclass_fields__ and kw[k] is not None}
        top = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **top)
        if sim_kw:
            cfg = replace(cfg, sim=replace(cfg.sim, **sim_kw))
        if out_kw:
            cfg = replace(cfg, output=replace(cfg.output, **out_kw))
        return cfg


def _lists(d: dict[str, Any]) -> dict[str, Any]:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
