"""Experiment specifications: one JSON document each, overridable from the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..benchmarks import make_objective
from ..optimizer import RUNNERS, RunConfig

MAP_FOR_MANIFOLD = {"sphere": "sphere", "linear": "linear", "mixed": "mixed-oracle"}
OVERFIT_SETTINGS = ("original-gp", "sup-nn", "semi-nn", "geometry-aware")


def parse_seeds(text) -> list[int]:
    """'0-9', '0,3,5' or a list of ints."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def default_m(big_d: int, d: int) -> int:
    return min(big_d, math.ceil(d * math.log(big_d)))


def default_run_config(objective_id: str, **overrides) -> RunConfig:
    """RunConfig matched to an objective: D, d, map kind and m = ceil(d ln D)."""
    obj = make_objective(objective_id)
    base = {
        "big_d": obj.big_d,
        "d": obj.d if obj.manifold != "mixed" else obj.d1 + obj.d2,
        "d1": obj.d1,
        "d2": obj.d2,
        "map_kind": MAP_FOR_MANIFOLD[obj.manifold],
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if "m" not in base:
        base["m"] = default_m(obj.big_d, base["d"])
    return RunConfig(**base)


@dataclass
class ExperimentSpec:
    objective: str
    method: str = "rpmbo"
    seeds: list = field(default_factory=lambda: list(range(10)))
    out: str = "results"
    run: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        self.seeds = parse_seeds(self.seeds)
        if len(self.seeds) < 1:
            raise ValueError("need at least one seed")
        if self.method not in RUNNERS:
            raise ValueError(f"method must be one of {sorted(RUNNERS)}")

    def run_config(self, seed: int) -> RunConfig:
        return default_run_config(self.objective, **{**self.run, "seed": seed})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OverfitSpec:
    objective: str = "rhe-sphere-D1000-d10"
    sizes: list = field(default_factory=lambda: [10, 30, 50, 70, 100])
    test_size: int = 20
    settings: list = field(default_factory=lambda: list(OVERFIT_SETTINGS))
    samples: int = 100
    repeats: int = 30
    unlabeled: int = 100
    lambdas: int = 10
    steps: int = 200
    lr: float = 1e-2
    hidden: int = 35
    seed: int = 0
    out: str = "results/overfit"

    def __post_init__(self):
        self.sizes = [int(s) for s in self.sizes]
        if any(s < 2 for s in self.sizes):
            raise ValueError("labelled sizes must be >= 2")
        if self.test_size < 1 or self.samples < 1 or self.repeats < 1:
            raise ValueError("test size, samples and repeats must be positive")
        bad = set(self.settings) - set(OVERFIT_SETTINGS)
        if bad:
            raise ValueError(f"unknown settings {sorted(bad)}")

    def to_dict(self) -> dict:
        return asdict(self)


def _filter(cls, data: dict) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return data


def load_spec(path, cls=ExperimentSpec, **overrides):
    """Read a JSON spec and apply non-None overrides.

    Overrides naming a RunConfig field (budget, m, ...) go into ``run``.
    """
    data = json.loads(Path(path).read_text()) if path else {}
    run_names = {f.name for f in fields(RunConfig)}
    for k, v in overrides.items():
        if v is None:
            continue
        if cls is ExperimentSpec and k in run_names:
            data.setdefault("run", {})[k] = v
        else:
            data[k] = v
    return cls(**_filter(cls, data))
