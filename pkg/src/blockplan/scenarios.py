"""Built-in city instances, their known outcomes, and random generators.

Each scenario packages an instance with the facts expected of it (the
regression suite replays every fact against the solvers). Facts carry a
provenance tag: PAPER for values reported in the source case studies,
TRIVIAL for immediate arithmetic, DERIVED for values frozen from an
independent oracle computation.

The two-location families are parametric in the wobble delta that makes
one location slightly more attractive than the other; the donut city is
the fixed eleven-location urban-flight example.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import model, pwl
from .errors import MissingParam, UnknownScenario
from .model import CityInstance, InvestmentPlan, Neighbourhood, PlanEntry

PAPER = "PAPER"
TRIVIAL = "TRIVIAL"
DERIVED = "DERIVED"

DEFAULT_DELTA = 0.01

NAMES = (
    "fig-ne",
    "fig-poa",
    "fig-supra-negative",
    "fig-supra-improvement",
    "thm2-lower-bound",
    "donut",
)


@dataclass(frozen=True)
class KnownFact:
    label: str
    value: object
    tol: float
    provenance: str

    def __post_init__(self):
        if self.provenance not in (PAPER, TRIVIAL, DERIVED):
            raise ValueError(f"bad provenance {self.provenance!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    params: Mapping[str, float]
    instance: CityInstance
    known_facts: tuple[KnownFact, ...]


def _tent(delta: float) -> pwl.PwlFunction:
    return pwl.validate([(0.0, delta), (0.5, 1.0), (1.0, 0.0)])


def _raised_tent(delta: float) -> pwl.PwlFunction:
    return pwl.validate([(0.0, 3 * delta), (0.5, 1.0 + 2 * delta), (1.0, 2 * delta)])


def _two_locations(f_red: pwl.PwlFunction, f_blue: pwl.PwlFunction) -> CityInstance:
    return CityInstance(
        (
            Neighbourhood("red", 1.0, f_red),
            Neighbourhood("blue", 1.0, f_blue),
        ),
        population=1.0,
    )


def _donut_red() -> pwl.PwlFunction:
    return pwl.validate([(0.0, 25.0), (500.0, 100.0), (1000.0, 0.0)])


def _donut_blue() -> pwl.PwlFunction:
    return pwl.validate([(0.0, 26.0), (50.0, 101.0), (81.0, 58.0), (100.0, 1.0)])


def builtin(name: str, **params: float) -> Scenario:
    """Construct a built-in scenario by name.

    Two-location scenarios accept delta (default 0.01); the lower-bound
    scenario requires epsilon. Unknown names raise UnknownScenario.
    """
    if name not in NAMES:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(NAMES)}")
    if name == "donut":
        return donut_instance()
    if name == "thm2-lower-bound":
        if "epsilon" not in params:
            raise MissingParam("thm2-lower-bound requires an epsilon parameter")
        eps = float(params["epsilon"])
        instance = _two_locations(
            pwl.validate([(0.0, 1.0), (1.0, 0.0)]),
            pwl.validate([(0.0, 0.0), (1.0, 0.0)]),
        )
        facts = (
            KnownFact("opt", 0.25, 1e-6, PAPER),
            KnownFact("plan_cost", eps * eps / 32.0, 1e-12, PAPER),
            KnownFact("post_plan_eq_allocation", (1.0, 0.0), 1e-6, PAPER),
            KnownFact("post_plan_eq_welfare", eps / 4.0, 1e-8, PAPER),
        )
        return Scenario(name, {"epsilon": eps}, instance, facts)

    delta = float(params.get("delta", DEFAULT_DELTA))
    if name == "fig-ne":
        instance = _two_locations(_tent(delta), _tent(delta))
        facts = (
            KnownFact("eq_allocation", (0.5, 0.5), 1e-9, PAPER),
            KnownFact("eq_welfare", 1.0, 1e-8, PAPER),
            KnownFact("opt", 1.0, 1e-6, PAPER),
        )
    elif name == "fig-poa":
        instance = _two_locations(_tent(delta), _raised_tent(delta))
        facts = (
            KnownFact("eq_allocation", (0.0, 1.0), 1e-6, PAPER),
            KnownFact("eq_welfare", 2 * delta, 1e-8, PAPER),
            KnownFact("opt", 1.0 + delta, 1e-6, PAPER),
            KnownFact("poa", (1.0 + delta) / (2 * delta), 1e-3, PAPER),
        )
    elif name == "fig-supra-negative":
        # starts identical to fig-ne; the paired plan turns it into fig-poa
        instance = _two_locations(_tent(delta), _tent(delta))
        facts = (
            KnownFact("eq_welfare", 1.0, 1e-8, PAPER),
            KnownFact("plan_cost", 2 * delta, 1e-9, PAPER),
            KnownFact("post_plan_eq_welfare", 2 * delta, 1e-8, PAPER),
        )
    else:  # fig-supra-improvement
        instance = _two_locations(_tent(delta), _raised_tent(delta))
        facts = (
            KnownFact("eq_welfare", 2 * delta, 1e-8, PAPER),
            KnownFact("plan_cost", 2 * delta, 1e-9, PAPER),
            KnownFact("post_plan_eq_welfare", 1.0 + 2 * delta, 1e-6, PAPER),
        )
    return Scenario(name, {"delta": delta}, instance, facts)


def donut_instance() -> Scenario:
    """The urban-flight city: one big core, ten suburbs, population 1000.

    From the 50%-full start the core drains to 16% while suburbs fill to
    84%; the paired investment reverses this to a uniform 50%.
    """
    nbs = [Neighbourhood("red", 1000.0, _donut_red())]
    nbs.extend(Neighbourhood(f"blue{i}", 100.0, _donut_blue()) for i in range(1, 11))
    instance = CityInstance(tuple(nbs), population=1000.0)
    facts = (
        KnownFact("eq_mass_red", 160.0, 0.5, PAPER),
        KnownFact("eq_mass_blue", 84.0, 0.05, PAPER),
        KnownFact("density_red", 0.16, 5e-4, PAPER),
        KnownFact("density_blue", 0.84, 5e-4, PAPER),
        KnownFact("eq_payoff", 49.0, 0.01, DERIVED),
        KnownFact("post_plan_mass_red", 500.0, 0.5, PAPER),
        KnownFact("post_plan_mass_blue", 50.0, 0.05, PAPER),
        KnownFact("post_plan_payoff", 101.0, 0.01, DERIVED),
        KnownFact("plan_cost", 2250.0, 1e-6, DERIVED),
        KnownFact("initial_potential", 63000.0, 1e-6, DERIVED),
    )
    return Scenario("donut", {}, instance, facts)


def donut_plan() -> InvestmentPlan:
    """Replacement core utility that reverses the flight to the suburbs."""
    g_red = pwl.validate([(0.0, 32.0), (500.0, 101.0), (1000.0, 0.0)])
    cost = pwl.symmetric_difference_area(_donut_red(), g_red)
    return InvestmentPlan.of([PlanEntry(index=0, g=g_red, cost=cost)])


def paired_plan(scenario: Scenario) -> Optional[InvestmentPlan]:
    """The investment plan a scenario's post-plan facts refer to."""
    if scenario.name == "donut":
        return donut_plan()
    if scenario.name == "thm2-lower-bound":
        f1 = scenario.instance.neighbourhoods[0].utility
        rr = pwl.raise_to_target(f1, scenario.params["epsilon"] / 4.0)
        return InvestmentPlan.of(
            [PlanEntry(index=0, g=rr.g, cost=rr.cost, tau=rr.tau, alpha=rr.alpha, beta=rr.beta)]
        )
    if scenario.name == "fig-supra-negative":
        delta = scenario.params["delta"]
        g = _raised_tent(delta)
        cost = pwl.symmetric_difference_area(_tent(delta), g)
        return InvestmentPlan.of([PlanEntry(index=1, g=g, cost=cost)])
    if scenario.name == "fig-supra-improvement":
        delta = scenario.params["delta"]
        g = _raised_tent(delta)
        cost = pwl.symmetric_difference_area(_tent(delta), g)
        return InvestmentPlan.of([PlanEntry(index=0, g=g, cost=cost)])
    return None


def random_instance(
    seed: int,
    n: int,
    capacity_range: tuple[float, float] = (0.5, 1.5),
    peak_range: tuple[float, float] = (0.5, 2.0),
) -> CityInstance:
    """Random city of concave tents, deterministic in the seed.

    Each location gets a tent through (0, ell), (sigma, h), (u, ell')
    with ell, ell' <= h and sigma in the middle 60% of the capacity; the
    population is uniform between the largest capacity and the total.
    """
    if n < 1:
        raise ValueError("need at least one location")
    lo, hi = capacity_range
    if not (0.0 < lo <= hi) or not (0.0 < peak_range[0] <= peak_range[1]):
        raise ValueError("ranges must be positive and ordered")
    rng = np.random.default_rng(seed)
    nbs = []
    for i in range(n):
        u = float(rng.uniform(lo, hi))
        h = float(rng.uniform(*peak_range))
        sigma = float(rng.uniform(0.2 * u, 0.8 * u))
        ell = float(rng.uniform(0.0, h))
        ell_prime = float(rng.uniform(0.0, h))
        f = pwl.validate([(0.0, ell), (sigma, h), (u, ell_prime)])
        nbs.append(Neighbourhood(f"loc{i}", u, f))
    u_max = max(nb.capacity for nb in nbs)
    u_sum = sum(nb.capacity for nb in nbs)
    population = float(rng.uniform(u_max, u_sum))
    return model.validate_instance(CityInstance(tuple(nbs), population))
