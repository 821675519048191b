"""The utility company's pricing function and daily household bills.

The unit price for an interval is quadratic in the gap between the
community's aggregated load and the utility's forecast generation, plus a
base price.  A household's daily bill sums its own load times the unit
price over the horizon.  Two algebraically equivalent forms are provided
(compact, and decomposed into base and quadratic terms); their agreement
is a tested invariant.  Currency is abstract cost units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError


@dataclass
class TariffParams:
    """Base price and the utility's forecast generation curve."""

    p0: float
    generation: np.ndarray

    def __post_init__(self):
        self.generation = np.asarray(self.generation, dtype=float)

    def validate(self, horizon: int) -> list:
        problems = []
        if not self.p0 > 0.0:
            problems.append("tariff.p0: must be > 0, got %g" % self.p0)
        if len(self.generation) != horizon:
            problems.append(
                "tariff.generation: expected %d entries, got %d"
                % (horizon, len(self.generation))
            )
        if np.any(self.generation < 0):
            problems.append("tariff.generation: entries must be >= 0")
        return problems


def unit_price(aggregated: float, generation: float, p0: float) -> float:
    """Price per kWh for one interval: squared tracking gap plus base price."""
    gap = aggregated - generation
    return gap * gap + p0


def daily_bill(loads_m, loads_others, tariff: TariffParams) -> float:
    """Daily bill in compact form: sum_t l_t * price(L_t).

    Summed with math.fsum (compensated), so the decomposed form agrees to
    full precision even at long horizons.
    """
    loads_m = np.asarray(loads_m, dtype=float)
    loads_others = np.asarray(loads_others, dtype=float)
    _check_lengths(loads_m, loads_others, tariff)
    terms = [
        loads_m[t]
        * unit_price(loads_m[t] + loads_others[t], tariff.generation[t], tariff.p0)
        for t in range(len(loads_m))
    ]
    return math.fsum(terms)


def daily_bill_decomposed(loads_m, loads_others, tariff: TariffParams) -> float:
    """Daily bill split into a base-price term and a quadratic tracking term."""
    loads_m = np.asarray(loads_m, dtype=float)
    loads_others = np.asarray(loads_others, dtype=float)
    _check_lengths(loads_m, loads_others, tariff)
    base = [loads_m[t] * tariff.p0 for t in range(len(loads_m))]
    quad = [
        loads_m[t]
        * (loads_m[t] + loads_others[t] - tariff.generation[t]) ** 2
        for t in range(len(loads_m))
    ]
    return math.fsum(base + quad)


def _check_lengths(loads_m, loads_others, tariff):
    if not (len(loads_m) == len(loads_others) == len(tariff.generation)):
        raise LengthMismatchError(
            "series lengths differ: own=%d others=%d generation=%d"
            % (len(loads_m), len(loads_others), len(tariff.generation))
        )
