"""Nash-equilibrium machinery.

The deviation test is non-atomic: a mover evaluates a destination at its
current load, since an infinitesimal arrival does not change it. The
regret gap of an allocation is the best payoff improvement any occupied
location's residents could get by moving to a non-full location; an
allocation is an equilibrium (up to eta) when that gap is at most eta.

Best-response dynamics repeatedly shift mass along the max-regret pair
with a decaying step. The potential sum_i integral_0^{x_i} f_i is a
Lyapunov function for small enough steps and is tracked exactly along the
trajectory. For n <= 3 a grid enumeration provides an exhaustive oracle
over approximate equilibria; larger instances fall back to multi-start
dynamics, which is a heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels, model, pwl
from .errors import DimensionMismatch, EmptyEquilibriumSet, InstanceTooLarge
from .model import Allocation, CityInstance

DEFAULT_MAX_ITERS = 1_000_000
DEFAULT_WINDOW = 8
# Defaults relative to instance scale: step = N / 1000, tol = 1e-6 * max h.
DEFAULT_STEP_FRACTION = 1e-3
DEFAULT_TOL_FRACTION = 1e-6


@dataclass(frozen=True)
class DynamicsConfig:
    """Knobs for the best-response process.

    initial_step/regret_tol of None resolve at run time to the instance
    defaults above.
    """

    initial_step: Optional[float] = None
    step_decay: float = 0.5
    regret_tol: Optional[float] = None
    max_iters: int = DEFAULT_MAX_ITERS
    oscillation_window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.initial_step is not None and not self.initial_step > 0.0:
            raise ValueError("initial_step must be positive")
        if not 0.0 < self.step_decay < 1.0:
            raise ValueError("step_decay must lie in (0, 1)")
        if self.regret_tol is not None and self.regret_tol < 0.0:
            raise ValueError("regret_tol must be non-negative")
        if self.max_iters < 0 or self.oscillation_window < 0:
            raise ValueError("max_iters and oscillation_window must be non-negative")

    def resolved(self, instance: CityInstance) -> tuple[float, float]:
        step = self.initial_step
        if step is None:
            step = instance.population * DEFAULT_STEP_FRACTION
        tol = self.regret_tol
        if tol is None:
            h_max = max(pwl.peak_profile(nb.utility).h for nb in instance.neighbourhoods)
            tol = DEFAULT_TOL_FRACTION * h_max
        return step, tol


@dataclass(frozen=True)
class DynamicsTrace:
    """Full trajectory: row k is the state after k moves.

    move[k]/step[k] describe the move between rows k and k+1; gap is the
    regret at the row's state and potential the exactly-accumulated
    Lyapunov value.
    """

    x: np.ndarray
    welfare: np.ndarray
    gap: np.ndarray
    potential: np.ndarray
    move: np.ndarray
    step: np.ndarray


@dataclass(frozen=True)
class EquilibriumReport:
    allocation: Allocation
    welfare: float
    max_regret: float
    converged: bool
    iterations: int
    potential_trace: Optional[tuple[float, ...]] = None
    trajectory: Optional[DynamicsTrace] = None


def regret(instance: CityInstance, x) -> tuple[float, Optional[int], Optional[int]]:
    """Best payoff gain available to anyone, with the pair realising it.

    Returns (gap, source, target); gap is clamped at 0, ties break to the
    lowest (source, target) pair, and indices are None when no pair is
    admissible (single location, or nobody can move).
    """
    xs = x.x if isinstance(x, Allocation) else tuple(float(v) for v in x)
    if len(xs) != instance.n:
        raise DimensionMismatch(
            f"allocation has {len(xs)} entries, instance has {instance.n}"
        )
    p = [pwl.evaluate(nb.utility, v) for v, nb in zip(xs, instance.neighbourhoods)]
    caps = instance.capacities
    best = -math.inf
    src: Optional[int] = None
    tgt: Optional[int] = None
    for i in range(instance.n):
        if not xs[i] > 0.0:
            continue
        for j in range(instance.n):
            if j == i or not xs[j] < caps[j]:
                continue
            d = p[j] - p[i]
            if d > best:
                best = d
                src, tgt = i, j
    if src is None:
        return 0.0, None, None
    return max(best, 0.0), src, tgt


def is_equilibrium(instance: CityInstance, x, eta: float) -> bool:
    """True iff nobody can gain more than eta by moving."""
    gap, _, _ = regret(instance, x)
    return gap <= eta


def potential(instance: CityInstance, x) -> float:
    """Lyapunov potential: sum of each utility's integral up to its load."""
    xs = x.x if isinstance(x, Allocation) else tuple(float(v) for v in x)
    if len(xs) != instance.n:
        raise DimensionMismatch(
            f"allocation has {len(xs)} entries, instance has {instance.n}"
        )
    return sum(pwl.integral(nb.utility, 0.0, v) for v, nb in zip(xs, instance.neighbourhoods))


def best_response_dynamics(
    instance: CityInstance,
    start,
    config: Optional[DynamicsConfig] = None,
    record_trace: bool = False,
) -> EquilibriumReport:
    """Run the max-regret best-response process from a starting allocation.

    Non-convergence within max_iters is reported (converged=False with the
    final state), never raised.
    """
    config = config or DynamicsConfig()
    start = start if isinstance(start, Allocation) else model.validate_allocation(instance, start)
    step0, eta = config.resolved(instance)
    xs, ys, off, caps = model.packed(instance)
    x, iters, converged, final_gap, trace = _kernels.run_dynamics(
        xs,
        ys,
        off,
        caps,
        start.as_array(),
        step0,
        config.step_decay,
        eta,
        config.max_iters,
        config.oscillation_window,
        record_trace,
    )
    alloc = Allocation(tuple(float(v) for v in x))
    traj = None
    pot_trace = None
    if trace is not None:
        traj = DynamicsTrace(
            x=trace["x"],
            welfare=trace["welfare"],
            gap=trace["gap"],
            potential=trace["potential"],
            move=trace["move"],
            step=trace["step"],
        )
        pot_trace = tuple(float(v) for v in trace["potential"])
    return EquilibriumReport(
        allocation=alloc,
        welfare=model.welfare(instance, alloc),
        max_regret=float(final_gap),
        converged=converged,
        iterations=iters,
        potential_trace=pot_trace,
        trajectory=traj,
    )


# --- canonical starting allocations --------------------------------------


def proportional_start(instance: CityInstance) -> Allocation:
    """Load every location to the same fraction of its capacity."""
    caps = np.asarray(instance.capacities)
    x = caps * (instance.population / caps.sum())
    return Allocation(tuple(float(v) for v in x))


def uniform_start(instance: CityInstance) -> Allocation:
    """Split the population equally, spilling overflow by index order."""
    caps = list(instance.capacities)
    n = len(caps)
    x = [0.0] * n
    remaining = instance.population
    open_idx = list(range(n))
    while remaining > 1e-15 * max(1.0, instance.population) and open_idx:
        share = remaining / len(open_idx)
        next_open = []
        for i in open_idx:
            room = caps[i] - x[i]
            take = min(room, share)
            x[i] += take
            remaining -= take
            if x[i] < caps[i]:
                next_open.append(i)
        open_idx = next_open
    return Allocation(tuple(x))


def corner_start(instance: CityInstance, first: int) -> Allocation:
    """Fill one location to capacity first, then the rest by index."""
    caps = instance.capacities
    n = len(caps)
    x = [0.0] * n
    remaining = instance.population
    order = [first] + [i for i in range(n) if i != first]
    for i in order:
        take = min(caps[i], remaining)
        x[i] = take
        remaining -= take
    return Allocation(tuple(x))


def _random_start(instance: CityInstance, rng: np.random.Generator) -> Allocation:
    caps = np.asarray(instance.capacities)
    w = rng.random(len(caps)) * caps
    x = np.zeros_like(caps)
    remaining = instance.population
    # proportional to random weights, capped, spilling in weight order
    for i in np.argsort(-w):
        take = min(caps[i], remaining)
        x[i] = take
        remaining -= take
        if remaining <= 0.0:
            break
    # soften the corner: mix with the proportional profile
    prop = caps * (instance.population / caps.sum())
    lam = rng.random()
    mix = lam * x + (1.0 - lam) * prop
    return Allocation(tuple(float(v) for v in mix))


# --- grid oracle ----------------------------------------------------------


def _axis_values(u: float, spacing: float) -> np.ndarray:
    k = int(math.floor(u / spacing * (1.0 + 1e-12)))
    vals = np.arange(k + 1, dtype=np.float64) * spacing
    if vals[-1] < u:
        vals = np.append(vals, u)
    return vals


def grid_allocations(instance: CityInstance, spacing: float):
    """Yield chunks of grid-feasible allocations (n <= 3).

    Free coordinates run over multiples of the spacing plus the exact
    capacity; the last coordinate absorbs the remainder exactly, so every
    row sums to the population to the last bit.
    """
    n = instance.n
    caps = instance.capacities
    pop = instance.population
    if n == 1:
        yield np.array([[pop]])
        return
    if n == 2:
        v0 = _axis_values(caps[0], spacing)
        x1 = pop - v0
        ok = (x1 >= 0.0) & (x1 <= caps[1])
        rows = np.column_stack([v0[ok], x1[ok]])
        # exact far corner (x1 = u1) is not representable via the derived
        # coordinate, so add it explicitly
        x0c = pop - caps[1]
        if 0.0 <= x0c <= caps[0]:
            rows = np.vstack([rows, [x0c, caps[1]]])
        yield rows
        return
    v0 = _axis_values(caps[0], spacing)
    v1 = _axis_values(caps[1], spacing)
    chunk = max(1, int(2_000_000 / max(1, len(v1))))
    for lo in range(0, len(v0), chunk):
        a = v0[lo : lo + chunk]
        g0, g1 = np.meshgrid(a, v1, indexing="ij")
        g0 = g0.ravel()
        g1 = g1.ravel()
        g2 = pop - g0 - g1
        ok = (g2 >= 0.0) & (g2 <= caps[2])
        if ok.any():
            yield np.column_stack([g0[ok], g1[ok], g2[ok]])


def _payoff_matrix(instance: CityInstance, x: np.ndarray) -> np.ndarray:
    p = np.empty_like(x)
    for i, nb in enumerate(instance.neighbourhoods):
        p[:, i] = np.interp(x[:, i], nb.utility.xs, nb.utility.ys)
    return p


def enumerate_equilibria_grid(
    instance: CityInstance,
    resolution: float,
    *,
    spacing: Optional[float] = None,
    eta: Optional[float] = None,
) -> list[Allocation]:
    """All grid allocations whose regret gap is at most the grid tolerance.

    The tolerance defaults to resolution * (max utility slope), which is
    coarse enough that true equilibria are not missed at the chosen
    resolution. Returns an empty list if nothing qualifies (the caller may
    refine via the ``spacing`` override while keeping the tolerance).
    """
    if instance.n > 3:
        raise InstanceTooLarge(f"grid enumeration supports n <= 3, got n={instance.n}")
    if not resolution > 0.0:
        raise ValueError("resolution must be positive")
    if eta is None:
        eta = resolution * instance.max_abs_slope()
    if spacing is None:
        spacing = resolution
    found: list[Allocation] = []
    for rows in grid_allocations(instance, spacing):
        p = _payoff_matrix(instance, rows)
        caps = np.asarray(instance.capacities)
        gaps = _kernels.regret_gaps(rows, p, caps)
        for row in rows[gaps <= eta]:
            found.append(Allocation(tuple(float(v) for v in row)))
    return found


def worst_equilibrium_welfare(
    instance: CityInstance,
    resolution: float,
    *,
    config: Optional[DynamicsConfig] = None,
    random_starts: int = 8,
    seed: int = 0,
) -> float:
    """Minimum welfare over the discovered equilibrium set.

    Exhaustive (grid) for n <= 3; multi-start dynamics otherwise, which
    may miss equilibria and is flagged heuristic by callers.
    """
    if instance.n <= 3:
        eqs = enumerate_equilibria_grid(instance, resolution)
        if not eqs:
            raise EmptyEquilibriumSet(
                f"no equilibria on the grid at resolution {resolution!r}; refine it"
            )
        return min(model.welfare(instance, a) for a in eqs)

    starts: list[Allocation] = [proportional_start(instance), uniform_start(instance)]
    starts.extend(corner_start(instance, i) for i in range(instance.n))
    rng = np.random.default_rng(seed)
    starts.extend(_random_start(instance, rng) for _ in range(random_starts))
    welfares = []
    for start in starts:
        report = best_response_dynamics(instance, start, config)
        if report.converged:
            welfares.append(report.welfare)
    if not welfares:
        raise EmptyEquilibriumSet("no dynamics run converged; adjust the config")
    return min(welfares)
