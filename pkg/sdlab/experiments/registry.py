"""Named experiments with their anchors, pass rules and optional scan points."""
from __future__ import annotations

import importlib
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from sdlab.config import ScenarioConfig
from sdlab.errors import UnknownExperimentError

Row = dict[str, Any]
Params = dict[str, Any]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class Verdict:
    checks: tuple[Check, ...]
    borderline: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
            "borderline": list(self.borderline),
        }


@dataclass(frozen=True)
class CurveSpec:
    x: str
    ys: tuple[str, ...]
    group_by: Optional[str] = None


@dataclass(frozen=True)
class Experiment:
    """A reproducible numerical experiment.

    ``rule`` must depend on nothing but the CSV rows, the resolved parameters
    and the scenario echoed in the CSV header, so verdicts can be rechecked
    offline.
    """

    name: str
    anchor: str
    description: str
    produce: Callable[[ScenarioConfig, Params], list[Row]]
    rule: Callable[[list[Row], Params, ScenarioConfig], Verdict]
    defaults: Params = field(default_factory=dict)
    curves: tuple[CurveSpec, ...] = ()
    point: Optional[Callable[[Params, ScenarioConfig, Params], Row]] = None
    scan_rule: Optional[Callable[[list[Row], Params, ScenarioConfig], Verdict]] = None

    def resolve_params(self, cfg: ScenarioConfig) -> Params:
        return {**self.defaults, **cfg.params}


REGISTRY: dict[str, Experiment] = {}


def register(experiment: Experiment) -> Experiment:
    if experiment.name in REGISTRY:
        raise ValueError(f"experiment {experiment.name!r} registered twice")
    REGISTRY[experiment.name] = experiment
    return experiment


def _load_scenarios() -> None:
    importlib.import_module("sdlab.experiments.scenarios")


def all_experiments() -> list[Experiment]:
    _load_scenarios()
    return [REGISTRY[name] for name in sorted(REGISTRY)]


def get_experiment(name: str) -> Experiment:
    _load_scenarios()
    try:
        return REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise UnknownExperimentError(f"Unknown experiment {name!r}. Known experiments: {known}") from None
