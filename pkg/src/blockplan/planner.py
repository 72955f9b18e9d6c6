"""Targeted-investment planning with certified cost and welfare bounds.

Given a benchmark welfare W (any lower bound on the true optimum; by
default the refined DP value), the planner either finds a critical
location, one whose capacity-peak product u*h reaches phi*W with
phi = (sqrt(5)-1)/2, and raises just that location, or raises the minimal
prefix of locations in decreasing peak order whose u*h mass covers W.
Both branches use the flank raise from pwl.raise_to_target.

The certificate then checks numerically, against the grid oracle or
multi-start dynamics, that the plan's cost stays within
(1+phi)/2 * eps^2 * W and that every discovered equilibrium of the
improved instance has welfare at least eps * W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from . import equilibrium, model, optimum, pwl
from .errors import EmptyEquilibriumSet, EpsilonOutOfRange, NegativeInput, NoPrefix
from .model import CityInstance, InvestmentPlan, PlanEntry

PHI = (math.sqrt(5.0) - 1.0) / 2.0
# (1+phi)/2, usually displayed rounded as 0.81
COST_BOUND_FACTOR = (1.0 + PHI) / 2.0
COST_SLACK = 1e-9

CRITICAL = "critical"
NO_CRITICAL = "no-critical"


@dataclass(frozen=True)
class PlannerDiagnostics:
    phi: float
    branch: str
    lam: float
    benchmark: float
    k_star: Optional[int] = None
    epsilon_star: Optional[float] = None


@dataclass(frozen=True)
class Certificate:
    total_cost: float
    cost_bound: float
    welfare_floor: float
    worst_eq_welfare: float
    cost_ok: bool
    welfare_ok: bool
    heuristic_equilibria: bool
    certification_tol: float


def _peaks(instance: CityInstance) -> list[pwl.PeakProfile]:
    return [pwl.peak_profile(nb.utility) for nb in instance.neighbourhoods]


def find_critical(instance: CityInstance, benchmark: float) -> Optional[tuple[int, float]]:
    """Location with u*h >= phi*W maximising u*h, or None.

    Ties break to the lowest index; the largest u*h minimises the cost
    bound eps^2/(2*lambda)*W among qualifying choices.
    """
    if not benchmark > 0.0:
        raise NegativeInput(f"benchmark welfare must be positive, got {benchmark!r}")
    best: Optional[tuple[int, float]] = None
    for i, (nb, prof) in enumerate(zip(instance.neighbourhoods, _peaks(instance))):
        uh = nb.capacity * prof.h
        if uh >= PHI * benchmark and (best is None or uh > best[1]):
            best = (i, uh)
    if best is None:
        return None
    return best[0], best[1] / benchmark


def select_k_star(instance: CityInstance, benchmark: float) -> tuple[int, float, list[int]]:
    """Minimal peak-ordered prefix whose sum of u*h covers the benchmark.

    Returns (k_star, lambda, ordering) where ordering sorts locations by
    peak height descending (ties: lower index first) and lambda is the
    prefix sum divided by W.
    """
    if not benchmark > 0.0:
        raise NegativeInput(f"benchmark welfare must be positive, got {benchmark!r}")
    peaks = _peaks(instance)
    ordering = sorted(range(instance.n), key=lambda i: (-peaks[i].h, i))
    prefix = 0.0
    for k, i in enumerate(ordering, start=1):
        prefix += instance.neighbourhoods[i].capacity * peaks[i].h
        if prefix >= benchmark:
            return k, prefix / benchmark, ordering
    raise NoPrefix(
        f"sum of u*h = {prefix!r} falls short of benchmark {benchmark!r}; W must not exceed opt"
    )


def plan_investment(
    instance: CityInstance, epsilon: float, benchmark: float
) -> tuple[InvestmentPlan, PlannerDiagnostics]:
    """Synthesise the investment plan for a welfare floor of epsilon*W."""
    if not 0.0 < epsilon <= 1.0:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1], got {epsilon!r}")
    if not benchmark > 0.0:
        raise NegativeInput(f"benchmark welfare must be positive, got {benchmark!r}")
    peaks = _peaks(instance)
    critical = find_critical(instance, benchmark)
    if critical is not None:
        idx, lam = critical
        # targets above the peak have no level crossing; cap at the peak
        # (only reachable when epsilon > lambda, which needs epsilon > phi)
        eps_star = min(epsilon / lam, 1.0)
        rr = pwl.raise_to_target(instance.neighbourhoods[idx].utility, eps_star * peaks[idx].h)
        entry = PlanEntry(
            index=idx, g=rr.g, cost=rr.cost, tau=rr.tau, alpha=rr.alpha, beta=rr.beta
        )
        diag = PlannerDiagnostics(
            phi=PHI, branch=CRITICAL, lam=lam, benchmark=benchmark, epsilon_star=eps_star
        )
        return InvestmentPlan.of([entry]), diag

    k_star, lam, ordering = select_k_star(instance, benchmark)
    entries = []
    for i in ordering[:k_star]:
        rr = pwl.raise_to_target(instance.neighbourhoods[i].utility, epsilon * peaks[i].h)
        entries.append(
            PlanEntry(index=i, g=rr.g, cost=rr.cost, tau=rr.tau, alpha=rr.alpha, beta=rr.beta)
        )
    diag = PlannerDiagnostics(
        phi=PHI, branch=NO_CRITICAL, lam=lam, benchmark=benchmark, k_star=k_star
    )
    return InvestmentPlan.of(entries), diag


def certify(
    instance: CityInstance,
    plan: InvestmentPlan,
    epsilon: float,
    benchmark: float,
    resolution: float,
    *,
    config: Optional[equilibrium.DynamicsConfig] = None,
) -> Certificate:
    """Check the plan's cost bound and the equilibrium welfare floor.

    The cost check audits the plan's declared total cost. The welfare
    check applies the plan and takes the worst welfare over the grid
    oracle's equilibria (n <= 3; retried at half spacing with unchanged
    tolerance if the grid comes up empty) or over multi-start dynamics
    (n > 3, flagged heuristic). The floor allows the discretisation slack
    resolution * max-slope * N.
    """
    if not 0.0 < epsilon <= 1.0:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1], got {epsilon!r}")
    if not benchmark > 0.0:
        raise NegativeInput(f"benchmark welfare must be positive, got {benchmark!r}")
    cost_bound = COST_BOUND_FACTOR * epsilon * epsilon * benchmark
    cost_ok = plan.total_cost <= cost_bound + COST_SLACK

    improved = model.apply_plan(instance, plan)
    slope = improved.max_abs_slope()
    tol = resolution * slope * instance.population
    heuristic = instance.n > 3
    if heuristic:
        worst = equilibrium.worst_equilibrium_welfare(improved, resolution, config=config)
    else:
        eqs = equilibrium.enumerate_equilibria_grid(improved, resolution)
        if not eqs:
            eqs = equilibrium.enumerate_equilibria_grid(
                improved, resolution, spacing=resolution / 2.0, eta=resolution * slope
            )
        if not eqs:
            raise EmptyEquilibriumSet(
                f"no equilibria found at resolution {resolution!r} even after refining"
            )
        worst = min(model.welfare(improved, a) for a in eqs)

    welfare_floor = epsilon * benchmark
    return Certificate(
        total_cost=plan.total_cost,
        cost_bound=cost_bound,
        welfare_floor=welfare_floor,
        worst_eq_welfare=worst,
        cost_ok=cost_ok,
        welfare_ok=worst >= welfare_floor - tol,
        heuristic_equilibria=heuristic,
        certification_tol=tol,
    )


def default_benchmark(instance: CityInstance) -> float:
    """The planner's default W: the refined DP optimum (a lower bound)."""
    return optimum.opt(instance).value
