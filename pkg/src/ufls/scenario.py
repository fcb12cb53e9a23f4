"""Scenario files: JSON in, validated model objects out.

Schema (SI units, MW, seconds)::

    {
      "name": "scenario1",
      "f0": 50.0,
      "duration": 60.0,
      "dt": 0.001,
      "seed": 0,
      "scheme": "none",
      "damping_D": 0.0,
      "noise_std": 0.0,
      "fleet": [{"id": "G1", "plant_type": "thermal", "capacity": 3000,
                 "inertia_H": 4.0, "droop_R": 0.05, "governor_T": 0.5,
                 "headroom": 150, "pm_setpoint": 1500, "bus": "39"}, ...],
      "wind_profiles": {"WF1": [133.3, ...]},         # optional, 1 s resolution
      "loads": [{"bus": "3", "p_mw": [300.0, ...], "q_mvar": [...]}, ...],
      "events": [{"time": 5.0, "kind": "generator_trip", "target": "G4"}],
      "perturbation": {"amplitude": 0.0, "tau": 2.0, "f_osc": 1.0,
                       "phases": {"3": 0.0, ...}},
      "estimator": {"window_cycles": 3, "eipdft_iterations": 2},
      "relay": {"rocof_window": 25, "f_ls_debounce": 2, "lr_debounce": 2, "lr_delay": 5.0,
                "rocof_filter": "hold"},
      "calibration": {"target_rocof": 0.44, "trip": ["G4", "G6"]}
    }

``p_mw`` may be a single number (flat profile). ``calibration`` is optional;
when present every inertia constant is scaled so that losing the units listed
under ``trip`` produces the target initial ROCOF.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .grid import BusPerturbation, Event, Generator, GridModel, Load, calibrate_inertia
from .pmu import EstimatorConfig
from .relay import SCHEMES, RelayConfig


class ScenarioError(ValueError):
    """The scenario file is malformed or physically inconsistent."""


BALANCE_TOL_PU = 1e-6


@dataclass
class Scenario:
    name: str
    fleet: list[Generator]
    loads: list[Load]
    events: list[Event]
    scheme: str = "none"
    duration: float = 60.0
    dt: float = 1e-3
    seed: int = 0
    f0: float = 50.0
    damping_D: float = 1.0
    noise_std: float = 0.0
    wind_profiles: dict = field(default_factory=dict)
    perturbation: BusPerturbation = field(default_factory=BusPerturbation)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    relay: RelayConfig = field(default_factory=RelayConfig)
    calibration: dict | None = None
    inertia_scale: float = 1.0

    def with_scheme(self, scheme: str) -> "Scenario":
        s = copy.deepcopy(self)
        s.scheme = scheme
        s.validate()
        return s

    @property
    def load_buses(self) -> list[str]:
        return [ld.bus for ld in self.loads]

    @property
    def contingency_time(self) -> float | None:
        return min((e.time for e in self.events), default=None)

    def build_grid(self) -> GridModel:
        return GridModel(self.fleet, self.loads, damping_D=self.damping_D, f0=self.f0,
                         wind_profiles=self.wind_profiles)

    def imbalance_mw(self) -> float:
        gen = sum(g.pm_setpoint for g in self.fleet if g.online and g.synchronous)
        wind = 0.0
        for g in self.fleet:
            if g.online and not g.synchronous:
                prof = self.wind_profiles.get(g.id)
                wind += float(prof[0]) if prof is not None else g.pm_setpoint
        load = sum(ld.p_at(0.0) for ld in self.loads)
        return gen + wind - load

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ScenarioError(f"unknown scheme {self.scheme!r}")
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if not 0 < self.dt <= 0.01:
            raise ScenarioError("dt must lie in (0, 0.01] s")
        steps = self.estimator.frame_interval / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ScenarioError("dt must divide the reporting interval")
        ids = {g.id for g in self.fleet}
        buses = {ld.bus for ld in self.loads}
        if len(buses) != len(self.loads):
            raise ScenarioError("duplicate load buses")
        for ev in self.events:
            if ev.kind == "generator_trip" and ev.target not in ids:
                raise ScenarioError(f"event trips unknown generator {ev.target!r}")
            if ev.kind == "load_step" and ev.target not in buses:
                raise ScenarioError(f"event steps unknown load bus {ev.target!r}")
        base = max(sum(g.capacity for g in self.fleet), 1.0)
        if abs(self.imbalance_mw()) / base > BALANCE_TOL_PU:
            raise ScenarioError(
                f"initial generation and load differ by {self.imbalance_mw():.6g} MW")


def _profile(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


def parse_scenario(data: dict, calibrate: bool = True) -> Scenario:
    try:
        fleet = [Generator(**g) for g in data["fleet"]]
        loads = [Load(str(ld["bus"]), _profile(ld["p_mw"]),
                      _profile(ld["q_mvar"]) if "q_mvar" in ld else None)
                 for ld in data["loads"]]
        events = [Event(float(e["time"]), e["kind"], str(e["target"]), float(e.get("mw", 0.0)))
                  for e in data.get("events", [])]
        pert = dict(data.get("perturbation", {}))
        pert["phases"] = {str(k): float(v) for k, v in pert.get("phases", {}).items()}
        sc = Scenario(
            name=data.get("name", "scenario"),
            fleet=fleet,
            loads=loads,
            events=events,
            scheme=data.get("scheme", "none"),
            duration=float(data.get("duration", 60.0)),
            dt=float(data.get("dt", 1e-3)),
            seed=int(data.get("seed", 0)),
            f0=float(data.get("f0", 50.0)),
            damping_D=float(data.get("damping_D", 1.0)),
            noise_std=float(data.get("noise_std", 0.0)),
            wind_profiles={k: _profile(v) for k, v in data.get("wind_profiles", {}).items()},
            perturbation=BusPerturbation(**pert),
            estimator=EstimatorConfig(**data.get("estimator", {})),
            relay=RelayConfig(**data.get("relay", {})),
            calibration=data.get("calibration"),
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    sc.validate()
    if calibrate and sc.calibration:
        apply_calibration(sc, float(sc.calibration["target_rocof"]), sc.calibration["trip"])
    return sc


def apply_calibration(sc: Scenario, target_rocof: float, trip: list[str]) -> float:
    """Scale all inertia constants in place; returns the scale factor used."""
    tripped = [g for g in sc.fleet if g.id in trip]
    if len(tripped) != len(trip):
        raise ScenarioError("calibration trip references unknown generators")
    tripped_mw = sum(g.pm_setpoint for g in tripped)
    survivors = [g for g in sc.fleet if g.id not in trip]
    scale = calibrate_inertia(target_rocof, tripped_mw, survivors, sc.f0)
    for g in sc.fleet:
        g.inertia_H *= scale
    sc.inertia_scale *= scale
    return scale


def predicted_rocof(sc: Scenario, trip: list[str]) -> float:
    """Initial |df/dt| (Hz/s) from losing ``trip`` with the current inertia."""
    lost = sum(g.pm_setpoint for g in sc.fleet if g.id in trip)
    hs = sum(g.inertia_H * g.capacity for g in sc.fleet
             if g.synchronous and g.online and g.id not in trip)
    return sc.f0 * lost / (2.0 * hs)


def load_scenario(path: str | Path, calibrate: bool = True) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(data, calibrate)


def bundled(name: str, calibrate: bool = True) -> Scenario:
    """Load one of the shipped scenarios: ``scenario1`` or ``scenario2``."""
    ref = resources.files("ufls.scenarios").joinpath(f"{name}.json")
    return parse_scenario(json.loads(ref.read_text()), calibrate)
