"""Scenario model, validation, YAML (de)serialization, and synthetic generation.

A scenario bundles the community (household profiles), the utility tariff
(base price and forecast generation curve), the system efficiencies, and
the day's discretization into T intervals of dt = 24 / T hours.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .battery import BatteryParams, residential_battery
from .billing import TariffParams
from .decisions import HouseholdProfile, Role, classify, net_demand
from .errors import InvalidBatteryParamsError, ScenarioValidationError

SCHEMA_VERSION = 1


@dataclass
class Scenario:
    """A full day-ahead problem instance for one prosumer community."""

    households: list
    tariff: TariffParams
    eta_inv: float
    eta_bar: float
    horizon: int

    @property
    def dt(self) -> float:
        """Interval length in hours."""
        return 24.0 / self.horizon

    @property
    def n_households(self) -> int:
        return len(self.households)

    def validate(self) -> list:
        """Return all invariant violations as human-readable strings."""
        problems = []
        if not (isinstance(self.horizon, int) and self.horizon >= 1):
            problems.append("T: must be a positive integer, got %r" % self.horizon)
            return problems
        if not (0.0 < self.eta_inv <= 1.0):
            problems.append("eta_inv: must be in (0, 1], got %g" % self.eta_inv)
        if not (0.0 < self.eta_bar <= 1.0):
            problems.append("eta_bar: must be in (0, 1], got %g" % self.eta_bar)
        problems.extend(self.tariff.validate(self.horizon))
        if not self.households:
            problems.append("households: at least one household is required")
        seen = set()
        for profile in self.households:
            if profile.id in seen:
                problems.append("households[%s]: duplicate id" % profile.id)
            seen.add(profile.id)
            problems.extend(profile.validate(self.horizon))
        return problems

    def check(self):
        """Raise ScenarioValidationError listing every violation."""
        problems = self.validate()
        if problems:
            raise ScenarioValidationError(problems)
        return self

    def net_demands(self) -> np.ndarray:
        """Net demand matrix, shape (M, T)."""
        return np.array(
            [
                net_demand(h.demand, h.re_output, self.eta_inv)
                for h in self.households
            ]
        )

    def roles(self) -> np.ndarray:
        """Boolean matrix, True where the household is a taker, shape (M, T)."""
        return self.net_demands() > 0.0

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "T": self.horizon,
            "eta_inv": self.eta_inv,
            "eta_bar": self.eta_bar,
            "tariff": {
                "p0": self.tariff.p0,
                "generation": [float(x) for x in self.tariff.generation],
            },
            "households": [
                {
                    "id": h.id,
                    "demand": [float(x) for x in h.demand],
                    "re_output": [float(x) for x in h.re_output],
                    "initial_soc": float(h.initial_soc),
                    "battery": {
                        "s_min": h.battery.s_min,
                        "s_max": h.battery.s_max,
                        "rho_plus": h.battery.rho_plus,
                        "rho_minus": h.battery.rho_minus,
                        "rho_bar": h.battery.rho_bar,
                        "eta_plus": h.battery.eta_plus,
                        "eta_minus": h.battery.eta_minus,
                        "gamma_2": h.battery.gamma_2,
                    },
                }
                for h in self.households
            ],
        }

    def digest(self) -> str:
        """Stable content hash of the scenario (canonical JSON, sha256)."""
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


def _battery_from_dict(data: dict, path: str, problems: list):
    keys = (
        "s_min",
        "s_max",
        "rho_plus",
        "rho_minus",
        "rho_bar",
        "eta_plus",
        "eta_minus",
        "gamma_2",
    )
    missing = [k for k in keys if k not in data]
    if missing:
        problems.append("%s: missing fields %s" % (path, ", ".join(missing)))
        return None
    try:
        return BatteryParams(**{k: float(data[k]) for k in keys})
    except InvalidBatteryParamsError as exc:
        problems.append("%s: %s" % (path, exc))
        return None


def scenario_from_dict(data: dict) -> Scenario:
    """Build and fully validate a Scenario from a plain dict.

    Collects every violation before raising, so a bad file is reported in
    one pass.
    """
    problems = []
    if not isinstance(data, dict):
        raise ScenarioValidationError(["document root must be a mapping"])
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        problems.append(
            "schema_version: expected %d, got %r" % (SCHEMA_VERSION, version)
        )
    horizon = data.get("T")
    if not isinstance(horizon, int) or horizon < 1:
        problems.append("T: must be a positive integer, got %r" % horizon)
        raise ScenarioValidationError(problems)
    tariff_data = data.get("tariff") or {}
    tariff = TariffParams(
        p0=float(tariff_data.get("p0", 0.0)),
        generation=np.asarray(tariff_data.get("generation", []), dtype=float),
    )
    households = []
    for i, hdata in enumerate(data.get("households") or []):
        path = "households[%d]" % i
        battery = _battery_from_dict(hdata.get("battery") or {}, path + ".battery", problems)
        if battery is None:
            battery = residential_battery()
        households.append(
            HouseholdProfile(
                id=str(hdata.get("id", i)),
                demand=np.asarray(hdata.get("demand", []), dtype=float),
                re_output=np.asarray(hdata.get("re_output", []), dtype=float),
                battery=battery,
                initial_soc=float(hdata.get("initial_soc", battery.s_min)),
            )
        )
    scenario = Scenario(
        households=households,
        tariff=tariff,
        eta_inv=float(data.get("eta_inv", 0.0)),
        eta_bar=float(data.get("eta_bar", 0.0)),
        horizon=horizon,
    )
    problems.extend(scenario.validate())
    if problems:
        raise ScenarioValidationError(problems)
    return scenario


def load_scenario(path) -> Scenario:
    """Load and validate a scenario YAML document."""
    with open(path, "r") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioValidationError(["parse error: %s" % exc])
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path):
    """Write a scenario as a YAML document (deterministic layout)."""
    with open(path, "w") as fh:
        fh.write(
            "# gridshare scenario (energies in kWh, times in hours, "
            "costs in abstract units)\n"
        )
        yaml.safe_dump(scenario.to_dict(), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# synthetic scenarios


@dataclass
class SynthShape:
    """Shape knobs for the synthetic generator (powers in kW)."""

    demand_base: float = 0.25
    demand_peak: float = 1.4
    morning_hour: float = 8.0
    evening_hour: float = 19.0
    re_peak: float = 1.2
    solar_fraction: float = 0.5
    generation_ratio: float = 1.0  # sum(g) relative to sum of positive net demand
    p0: float = 0.01


def _gauss(hours, center, width):
    return np.exp(-0.5 * ((hours - center) / width) ** 2)


def synth_scenario(
    n_households: int,
    horizon: int,
    seed: int,
    shape: SynthShape | None = None,
) -> Scenario:
    """Generate a reproducible community scenario.

    Demand has morning and evening peaks; renewable output is a solar-like
    midday hump or a wind-like smoothed-noise series per household; the
    utility generation curve has a midday hump scaled so its total matches
    ``generation_ratio`` times the community's positive net demand.
    """
    if n_households < 1 or horizon < 2:
        raise ScenarioValidationError(
            ["synth requires at least 1 household and 2 intervals"]
        )
    shape = shape or SynthShape()
    rng = np.random.default_rng(seed)
    dt = 24.0 / horizon
    hours = (np.arange(horizon) + 0.5) * dt
    households = []
    for i in range(n_households):
        morning = rng.uniform(0.7, 1.3) * shape.demand_peak
        evening = rng.uniform(0.8, 1.4) * shape.demand_peak
        demand_power = (
            shape.demand_base
            + morning * _gauss(hours, shape.morning_hour, 1.8)
            + evening * _gauss(hours, shape.evening_hour, 2.4)
        )
        demand_power *= rng.uniform(0.95, 1.05, size=horizon)
        is_solar = rng.uniform() < shape.solar_fraction
        amp = rng.uniform(0.8, 1.2) * shape.re_peak
        if is_solar:
            sun = np.clip(np.sin(np.pi * (hours - 6.0) / 12.0), 0.0, None)
            re_power = amp * sun**2
        else:
            noise = rng.uniform(0.0, 1.0, size=horizon)
            # cheap smoothing so the wind series is noisy but not jagged
            kernel = np.array([0.25, 0.5, 0.25])
            padded = np.concatenate([noise[-1:], noise, noise[:1]])
            re_power = amp * (0.3 + 0.7 * np.convolve(padded, kernel, "valid"))
        battery = residential_battery()
        soc0 = battery.s_min + rng.uniform(0.25, 0.55) * (
            battery.s_max - battery.s_min
        )
        households.append(
            HouseholdProfile(
                id="h%d" % (i + 1),
                demand=np.maximum(demand_power * dt, 0.0),
                re_output=np.maximum(re_power * dt, 0.0),
                battery=battery,
                initial_soc=float(soc0),
            )
        )
    eta_inv = 0.95
    total_positive = 0.0
    for h in households:
        d = net_demand(h.demand, h.re_output, eta_inv)
        total_positive += float(np.sum(np.maximum(d, 0.0)))
    gen_shape = 0.15 + _gauss(hours, 13.0, 3.5)
    gen_total = shape.generation_ratio * total_positive
    generation = gen_shape * (gen_total / float(np.sum(gen_shape)))
    scenario = Scenario(
        households=households,
        tariff=TariffParams(p0=shape.p0, generation=generation),
        eta_inv=eta_inv,
        eta_bar=0.9,
        horizon=horizon,
    )
    return scenario.check()
