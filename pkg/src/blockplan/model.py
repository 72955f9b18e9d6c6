"""The game definition and state.

A city instance is an ordered list of neighbourhoods (capacity plus a
utility function on [0, capacity]) together with a total population N.
An allocation assigns a mass to every neighbourhood, respecting the
capacities and summing to N. Welfare is sum(x_i * f_i(x_i)). Investment
plans replace utilities at selected locations and carry the exact
symmetric-difference cost of doing so.

All values are immutable; every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import pwl
from .errors import (
    DimensionMismatch,
    DomainMismatch,
    IndexOutOfRange,
    InvalidInstance,
    NegativeInput,
    PwlError,
)
from .pwl import PwlFunction

# Relative tolerance on the population balance of an allocation.
MASS_TOL = 1e-9


@dataclass(frozen=True)
class Neighbourhood:
    name: str
    capacity: float
    utility: PwlFunction


@dataclass(frozen=True)
class CityInstance:
    neighbourhoods: tuple[Neighbourhood, ...]
    population: float

    @property
    def n(self) -> int:
        return len(self.neighbourhoods)

    @property
    def capacities(self) -> tuple[float, ...]:
        return tuple(nb.capacity for nb in self.neighbourhoods)

    @property
    def utilities(self) -> tuple[PwlFunction, ...]:
        return tuple(nb.utility for nb in self.neighbourhoods)

    def max_abs_slope(self) -> float:
        """Largest utility Lipschitz constant over all locations."""
        return max(pwl.max_abs_slope(nb.utility) for nb in self.neighbourhoods)


@dataclass(frozen=True)
class Allocation:
    x: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)


@dataclass(frozen=True)
class PlanEntry:
    """One location's replacement utility.

    tau/alpha/beta are populated when the entry came out of the
    rudimentary raise; hand-crafted replacements leave them None.
    """

    index: int
    g: PwlFunction
    cost: float
    tau: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None


@dataclass(frozen=True)
class InvestmentPlan:
    entries: tuple[PlanEntry, ...]
    total_cost: float = field(default=0.0)

    @staticmethod
    def of(entries: Sequence[PlanEntry]) -> "InvestmentPlan":
        return InvestmentPlan(tuple(entries), sum(e.cost for e in entries))


def validate_instance(raw) -> CityInstance:
    """Build a CityInstance from parsed scenario data, checking everything.

    ``raw`` is either an already-assembled CityInstance or a mapping with
    the scenario JSON layout::

        {"population": N, "neighbourhoods": [
            {"name": ..., "capacity": ..., "utility": {"breakpoints": [[m, v], ...]}}]}

    All violations are collected and reported together in InvalidInstance.
    """
    violations: list[str] = []
    if isinstance(raw, CityInstance):
        nbs = list(raw.neighbourhoods)
        population = raw.population
        for nb in nbs:
            if nb.capacity <= 0.0:
                violations.append(f"{nb.name}: capacity must be positive, got {nb.capacity!r}")
            if nb.utility.u != nb.capacity:
                violations.append(
                    f"{nb.name}: utility domain ends at {nb.utility.u!r}, capacity is {nb.capacity!r}"
                )
    else:
        try:
            population = float(raw["population"])
            entries = list(raw["neighbourhoods"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInstance([f"malformed scenario data: {exc}"]) from None
        nbs = []
        for k, item in enumerate(entries):
            name = str(item.get("name", f"loc{k}"))
            try:
                capacity = float(item["capacity"])
                bps = item["utility"]["breakpoints"]
            except (KeyError, TypeError, ValueError) as exc:
                violations.append(f"{name}: malformed entry: {exc}")
                continue
            if capacity <= 0.0:
                violations.append(f"{name}: capacity must be positive, got {capacity!r}")
            try:
                f = pwl.validate(bps)
            except PwlError as exc:
                violations.append(f"{name}: {type(exc).__name__}: {exc}")
                continue
            if f.u != capacity:
                violations.append(
                    f"{name}: utility domain ends at {f.u!r}, capacity is {capacity!r}"
                )
            nbs.append(Neighbourhood(name=name, capacity=capacity, utility=f))

    names = [nb.name for nb in nbs]
    if len(set(names)) != len(names):
        violations.append("neighbourhood names are not unique")
    if not nbs:
        violations.append("instance needs at least one neighbourhood")
    elif not violations:
        u_max = max(nb.capacity for nb in nbs)
        u_sum = sum(nb.capacity for nb in nbs)
        slack = MASS_TOL * max(1.0, abs(population))
        if not (u_max - slack <= population <= u_sum + slack):
            violations.append(
                "PopulationOutOfRange: population "
                f"{population!r} must lie in [max capacity {u_max!r}, total capacity {u_sum!r}]"
            )
    if violations:
        raise InvalidInstance(violations)
    return CityInstance(tuple(nbs), population)


def validate_allocation(instance: CityInstance, x: Sequence[float]) -> Allocation:
    """Check feasibility of x for the instance and wrap it."""
    xs = [float(v) for v in x]
    if len(xs) != instance.n:
        raise DimensionMismatch(f"allocation has {len(xs)} entries, instance has {instance.n}")
    slack = MASS_TOL * max(1.0, instance.population)
    for v, nb in zip(xs, instance.neighbourhoods):
        if v < -slack or v > nb.capacity + slack:
            raise InvalidInstance([f"{nb.name}: mass {v!r} outside [0, {nb.capacity!r}]"])
    total = sum(xs)
    if abs(total - instance.population) > MASS_TOL * max(1.0, instance.population):
        raise InvalidInstance(
            [f"allocation mass {total!r} does not match population {instance.population!r}"]
        )
    return Allocation(tuple(xs))


def welfare(instance: CityInstance, x) -> float:
    """Social welfare sum(x_i * f_i(x_i)) of an allocation."""
    xs = x.x if isinstance(x, Allocation) else tuple(float(v) for v in x)
    if len(xs) != instance.n:
        raise DimensionMismatch(f"allocation has {len(xs)} entries, instance has {instance.n}")
    return sum(v * pwl.evaluate(nb.utility, v) for v, nb in zip(xs, instance.neighbourhoods))


def apply_plan(instance: CityInstance, plan: InvestmentPlan) -> CityInstance:
    """New instance with plan entries' utilities swapped in.

    The input instance is untouched; locations not named by the plan keep
    their original utility.
    """
    replacements: dict[int, PwlFunction] = {}
    for entry in plan.entries:
        if not 0 <= entry.index < instance.n:
            raise IndexOutOfRange(
                f"plan entry index {entry.index} outside 0..{instance.n - 1}"
            )
        nb = instance.neighbourhoods[entry.index]
        if entry.g.u != nb.capacity:
            raise DomainMismatch(
                f"{nb.name}: replacement domain ends at {entry.g.u!r}, capacity is {nb.capacity!r}"
            )
        replacements[entry.index] = entry.g
    nbs = tuple(
        Neighbourhood(nb.name, nb.capacity, replacements.get(i, nb.utility))
        for i, nb in enumerate(instance.neighbourhoods)
    )
    return CityInstance(nbs, instance.population)


def plan_cost_recomputed(instance: CityInstance, plan: InvestmentPlan) -> float:
    """Independent recomputation of a plan's total symmetric-difference cost."""
    return sum(
        pwl.symmetric_difference_area(instance.neighbourhoods[e.index].utility, e.g)
        for e in plan.entries
    )


def price_of_anarchy(opt_value: float, eq_welfare: float) -> float:
    """Ratio of optimal to equilibrium welfare; +inf when the latter is 0."""
    if opt_value < 0.0 or eq_welfare < 0.0:
        raise NegativeInput(f"welfare values must be non-negative: {opt_value!r}, {eq_welfare!r}")
    if eq_welfare == 0.0:
        return math.inf
    return opt_value / eq_welfare


def packed(instance: CityInstance) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Flatten the instance's utilities into kernel-ready arrays.

    Returns (xs, ys, offsets, capacities): concatenated breakpoint masses
    and values, the int64 start offset of each location's run (n+1 long),
    and the capacity vector.
    """
    xs: list[float] = []
    ys: list[float] = []
    offsets = [0]
    for nb in instance.neighbourhoods:
        for x, y in nb.utility.points:
            xs.append(x)
            ys.append(y)
        offsets.append(len(xs))
    return (
        np.asarray(xs, dtype=np.float64),
        np.asarray(ys, dtype=np.float64),
        np.asarray(offsets, dtype=np.int64),
        np.asarray(instance.capacities, dtype=np.float64),
    )
