"""Per-interval decision spaces for prosumer households.

A household's net demand (appliance demand minus inverter-corrected local
renewable output) fixes its role for the interval: net consumers are
*takers*, net producers are *givers*.  Takers decide how to use the
battery and how much to draw from the community pool; givers decide how
much excess to offer to the pool, with the unshared remainder charged into
their battery locally.  This module provides the role classification, the
feasible regions for both roles, the resulting grid loads, and the
pool/line-loss accounting, plus an independent re-checker that replays a
full community state and validates every invariant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .battery import (
    BatteryParams,
    phi_minus,
    phi_plus,
    soc_next_giver,
    soc_next_taker,
)
from .errors import InfeasibleDecisionError, LengthMismatchError

#: slack for feasibility re-checks on replayed schedules
FEAS_TOL = 1e-9


class Role(enum.Enum):
    TAKER = "taker"
    GIVER = "giver"


def net_demand(d_bar, w, eta_inv: float):
    """Net demand: appliance demand minus inverter-corrected RE output.

    Works elementwise on arrays as well as on scalars.
    """
    return d_bar - eta_inv * w


def classify(d: float) -> Role:
    """Positive net demand makes a taker; zero or negative makes a giver."""
    return Role.TAKER if d > 0.0 else Role.GIVER


@dataclass
class HouseholdProfile:
    """One prosumer: forecasts, battery, and starting state-of-charge."""

    id: str
    demand: np.ndarray
    re_output: np.ndarray
    battery: BatteryParams
    initial_soc: float

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=float)
        self.re_output = np.asarray(self.re_output, dtype=float)

    def validate(self, horizon: int) -> list:
        """Return a list of human-readable invariant violations (maybe empty)."""
        problems = []
        prefix = "households[%s]" % self.id
        if len(self.demand) != horizon:
            problems.append(
                "%s.demand: expected %d entries, got %d"
                % (prefix, horizon, len(self.demand))
            )
        if len(self.re_output) != horizon:
            problems.append(
                "%s.re_output: expected %d entries, got %d"
                % (prefix, horizon, len(self.re_output))
            )
        if np.any(self.demand < 0):
            problems.append("%s.demand: entries must be >= 0" % prefix)
        if np.any(self.re_output < 0):
            problems.append("%s.re_output: entries must be >= 0" % prefix)
        if not (
            self.battery.s_min <= self.initial_soc <= self.battery.s_max
        ):
            problems.append(
                "%s.initial_soc: %g outside [%g, %g]"
                % (
                    prefix,
                    self.initial_soc,
                    self.battery.s_min,
                    self.battery.s_max,
                )
            )
        return problems


@dataclass(frozen=True)
class IntervalDecision:
    """One interval's decision pair: battery action ``a`` and sharing ``e``."""

    a: float
    e: float


@dataclass
class Schedule:
    """A full day of decisions for one household."""

    a: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.e = np.asarray(self.e, dtype=float)
        if self.a.shape != self.e.shape:
            raise LengthMismatchError(
                "a and e series differ: %s vs %s" % (self.a.shape, self.e.shape)
            )

    def __len__(self):
        return len(self.a)

    def decision(self, t: int) -> IntervalDecision:
        return IntervalDecision(float(self.a[t]), float(self.e[t]))

    def copy(self) -> "Schedule":
        return Schedule(self.a.copy(), self.e.copy())


@dataclass(frozen=True)
class TakerBounds:
    """Feasible region for a net-consuming interval.

    ``a`` lives in [a_min, a_max]; given ``a``, the pool draw ``e`` lives
    in [e_min(a), 0].  The zero decision is always inside the region.
    """

    a_min: float
    a_max: float
    d: float
    pool: float

    def e_min(self, a: float) -> float:
        return min(0.0, max(-self.d - a, -self.pool))

    def contains(self, a: float, e: float, tol: float = FEAS_TOL) -> bool:
        if not (self.a_min - tol <= a <= self.a_max + tol):
            return False
        return self.e_min(a) - tol <= e <= tol


@dataclass(frozen=True)
class GiverBounds:
    """Feasible region for a net-producing interval.

    The offer ``e`` lives in [e_min, e_max] with e_max = -d; the unshared
    remainder -d - e is charged locally, and the grid charge ``a`` lives in
    [0, a_max(e)].  Sharing everything with a = 0 is always feasible.
    """

    e_min: float
    e_max: float
    d: float
    phi: float           # charging headroom phi_plus(s) at the current SOC
    soc_headroom: float  # s_max - s
    eta_inv: float
    eta_plus: float

    def local_charge(self, e: float) -> float:
        return max(0.0, -self.d - e)

    def a_max(self, e: float) -> float:
        local = self.local_charge(e)
        cap_rate = self.phi - local
        cap_soc = (self.soc_headroom - self.eta_plus * local) / (
            self.eta_inv * self.eta_plus
        )
        return max(0.0, min(cap_rate, cap_soc))

    def contains(self, a: float, e: float, tol: float = FEAS_TOL) -> bool:
        if not (self.e_min - tol <= e <= self.e_max + tol):
            return False
        return -tol <= a <= self.a_max(e) + tol


def taker_bounds(
    s: float,
    d: float,
    pool_available: float,
    bat: BatteryParams,
    eta_inv: float,
    dt: float,
) -> TakerBounds:
    """Feasible (a, e) region for a taker at SOC ``s`` with net demand ``d``.

    The battery action is bounded below by the discharge rate limit, the
    minimum-SOC floor, and the load-nonnegativity requirement a >= -d, and
    above by the CC/CV rate limit and the exact no-overflow cap.
    """
    if d <= 0.0:
        raise InfeasibleDecisionError("taker_bounds requires d > 0, got %g" % d)
    pool_available = max(0.0, pool_available)
    a_min = max(
        phi_minus(bat, eta_inv, dt),
        -(s - bat.s_min) * eta_inv * bat.eta_minus,
        -d,
    )
    a_max = min(phi_plus(s, bat, dt), (bat.s_max - s) / (eta_inv * bat.eta_plus))
    a_min = min(a_min, 0.0)
    a_max = max(a_max, 0.0)
    return TakerBounds(a_min=a_min, a_max=a_max, d=d, pool=pool_available)


def giver_bounds(
    s: float,
    d: float,
    bat: BatteryParams,
    eta_inv: float,
    dt: float,
    min_offer: float = 0.0,
) -> GiverBounds:
    """Feasible (a, e) region for a giver at SOC ``s`` with net demand ``d``.

    ``min_offer`` lets the solver keep the community pool solvent while the
    other households' schedules are held fixed; it defaults to 0 so the
    region matches the single-household constraints exactly.
    """
    if d > 0.0:
        raise InfeasibleDecisionError("giver_bounds requires d <= 0, got %g" % d)
    phi = phi_plus(s, bat, dt)
    headroom = bat.s_max - s
    e_max = -d
    e_min = max(0.0, -d - phi, -d - headroom / bat.eta_plus, min_offer)
    e_min = min(e_min, e_max)
    return GiverBounds(
        e_min=e_min,
        e_max=e_max,
        d=d,
        phi=phi,
        soc_headroom=headroom,
        eta_inv=eta_inv,
        eta_plus=bat.eta_plus,
    )


def load(role: Role, d: float, dec: IntervalDecision) -> float:
    """Grid load implied by a feasible decision: d + a + e for takers, a for givers."""
    if role is Role.TAKER:
        l = d + dec.a + dec.e
    else:
        l = dec.a
    if l < -FEAS_TOL:
        raise InfeasibleDecisionError(
            "negative load %g from role=%s d=%g a=%g e=%g"
            % (l, role.value, d, dec.a, dec.e)
        )
    return max(l, 0.0)


def pool_build(offers, eta_bar: float) -> float:
    """Shared-energy pool built from giver offers after line losses."""
    return eta_bar * math.fsum(offers)


def aggregated_load(loads) -> float:
    """Total electricity requested from the utility at one interval."""
    return math.fsum(loads)


# ---------------------------------------------------------------------------
# independent replay / re-checking


@dataclass
class HouseholdTrace:
    """Replay of one household's schedule: loads, SOC path, roles."""

    loads: np.ndarray       # (T,)
    soc: np.ndarray         # (T+1,) interval-boundary SOC
    roles: list = field(default_factory=list)


def replay_household(
    profile: HouseholdProfile,
    schedule: Schedule,
    eta_inv: float,
    dt: float,
) -> HouseholdTrace:
    """Re-simulate one household's schedule from scratch.

    Raises InfeasibleActionError / InfeasibleDecisionError if the schedule
    violates SOC bounds or role constraints.  Pool-level feasibility is
    checked separately by :func:`audit_community`.
    """
    horizon = len(schedule)
    d = net_demand(profile.demand, profile.re_output, eta_inv)
    loads = np.zeros(horizon)
    soc = np.zeros(horizon + 1)
    roles = []
    s = float(profile.initial_soc)
    soc[0] = s
    for t in range(horizon):
        a = float(schedule.a[t])
        e = float(schedule.e[t])
        role = classify(float(d[t]))
        roles.append(role)
        if role is Role.TAKER:
            if e > FEAS_TOL:
                raise InfeasibleDecisionError(
                    "taker sharing decision must be <= 0 (t=%d, e=%g)" % (t, e)
                )
            loads[t] = load(role, float(d[t]), IntervalDecision(a, e))
            s = soc_next_taker(s, a, profile.battery, eta_inv, dt)
        else:
            if e < -FEAS_TOL or e > -float(d[t]) + FEAS_TOL:
                raise InfeasibleDecisionError(
                    "giver offer out of [0, -d] (t=%d, e=%g, d=%g)"
                    % (t, e, float(d[t]))
                )
            local = -float(d[t]) - e
            loads[t] = load(role, float(d[t]), IntervalDecision(a, e))
            s = soc_next_giver(s, a, max(local, 0.0), profile.battery, eta_inv, dt)
        soc[t + 1] = s
    return HouseholdTrace(loads=loads, soc=soc, roles=roles)


@dataclass
class CommunityTrace:
    """Replay of the whole community, with pool accounting."""

    loads: np.ndarray          # (M, T)
    soc: np.ndarray            # (M, T+1)
    aggregated: np.ndarray     # (T,)
    pool_leftover: np.ndarray  # (T,) eta_bar * offers - draws, >= 0


def audit_community(
    profiles,
    schedules,
    eta_inv: float,
    eta_bar: float,
    dt: float,
) -> CommunityTrace:
    """Replay every household and verify the aggregate pool balance.

    This is the independent feasibility re-checker used by the solver's
    property tests: it shares no state with the search machinery.
    """
    n = len(profiles)
    horizon = len(schedules[0])
    loads = np.zeros((n, horizon))
    soc = np.zeros((n, horizon + 1))
    traces = []
    for i, (profile, schedule) in enumerate(zip(profiles, schedules)):
        trace = replay_household(profile, schedule, eta_inv, dt)
        traces.append(trace)
        loads[i] = trace.loads
        soc[i] = trace.soc
    leftover = np.zeros(horizon)
    for t in range(horizon):
        offers = [
            float(schedules[i].e[t])
            for i in range(n)
            if traces[i].roles[t] is Role.GIVER
        ]
        draws = [
            -float(schedules[i].e[t])
            for i in range(n)
            if traces[i].roles[t] is Role.TAKER
        ]
        built = pool_build(offers, eta_bar)
        drawn = math.fsum(draws)
        if drawn > built + FEAS_TOL:
            raise InfeasibleDecisionError(
                "pool overdrawn at t=%d: draws %g > %g available" % (t, drawn, built)
            )
        leftover[t] = max(0.0, built - drawn)
    aggregated = np.array([aggregated_load(loads[:, t]) for t in range(horizon)])
    return CommunityTrace(
        loads=loads, soc=soc, aggregated=aggregated, pool_leftover=leftover
    )
