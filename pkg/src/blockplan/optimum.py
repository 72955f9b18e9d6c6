"""Optimal social welfare: grid dynamic program, refinement, and bounds.

x*f(x) is generally non-concave even for concave f, so the optimum is
found by a dynamic program over a mass grid followed by a closed-form
local refinement (per-piece the objective is quadratic in any pairwise
mass transfer). A sorted greedy fill gives a certified upper bound, and
an exhaustive grid scan serves as an oracle for small instances.

The DP works on whichever of population mass or total slack is smaller;
the slack side represents full-capacity allocations exactly, so tightly
packed instances (N equal or close to the total capacity) stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels, model, pwl
from .equilibrium import grid_allocations, _payoff_matrix
from .errors import GridTooFine, InstanceTooLarge
from .model import Allocation, CityInstance

DP_CELL_BUDGET = 10_000_000
REFINE_GAIN_TOL = 1e-12
MAX_REFINE_SWEEPS = 200


@dataclass(frozen=True)
class OptResult:
    value: float
    allocation: Allocation
    grid: float
    is_refined: bool


def _location_values(f: pwl.PwlFunction, masses: np.ndarray) -> np.ndarray:
    return masses * np.interp(masses, f.xs, f.ys)


def _reconstruct(layers: np.ndarray, values: list[np.ndarray], cells: int) -> list[int]:
    units = [0] * len(values)
    m = cells
    for i in range(len(values) - 1, -1, -1):
        vi = values[i]
        a_hi = min(len(vi) - 1, m)
        cand = layers[i][m - np.arange(a_hi + 1)] + vi[: a_hi + 1]
        a = int(np.argmax(cand))
        units[i] = a
        m -= a
    if m != 0:
        raise GridTooFine("dynamic program could not reconstruct a feasible allocation")
    return units


def opt_dp(instance: CityInstance, grid: Optional[float] = None) -> OptResult:
    """Best grid-feasible allocation: a lower bound on the true optimum.

    The requested grid is snapped so that a whole number of cells covers
    the DP side exactly; the snapped width is reported in the result.
    """
    if grid is None:
        grid = instance.population / 1e4
    if not grid > 0.0:
        raise ValueError("grid must be positive")
    if instance.population / grid > DP_CELL_BUDGET:
        raise GridTooFine(
            f"{instance.population / grid:.3g} cells exceed the {DP_CELL_BUDGET} budget"
        )
    caps = instance.capacities
    n = instance.n
    slack = sum(caps) - instance.population

    if slack <= 0.0:
        # forced allocation: everything exactly full
        alloc = Allocation(tuple(caps))
        return OptResult(model.welfare(instance, alloc), alloc, grid, False)

    side_total = min(slack, instance.population)
    cells = max(int(round(side_total / grid)), 4 * n, 1)
    g = side_total / cells
    from_slack = slack <= instance.population

    values = []
    for nb in instance.neighbourhoods:
        a_max = min(int(math.floor(nb.capacity / g * (1.0 + 1e-12))), cells)
        units = np.arange(a_max + 1, dtype=np.float64) * g
        masses = nb.capacity - units if from_slack else units
        values.append(_location_values(nb.utility, masses))
    layers = _kernels.dp_layers(values, cells)
    best = float(layers[n, cells])
    if not math.isfinite(best):
        raise GridTooFine("grid cannot represent any feasible allocation; coarsen it")
    units = _reconstruct(layers, values, cells)
    if from_slack:
        x = [caps[i] - units[i] * g for i in range(n)]
    else:
        x = [units[i] * g for i in range(n)]
    alloc = Allocation(tuple(x))
    return OptResult(model.welfare(instance, alloc), alloc, g, False)


def _segment_slope(f: pwl.PwlFunction, x: float) -> float:
    """Slope of the segment containing x."""
    pts = f.points
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x0 <= x <= x1:
            return (y1 - y0) / (x1 - x0)
    raise pwl.OutOfDomain(f"x={x!r} outside [0, {f.u!r}]")  # pragma: no cover


def _pair_objective(fi: pwl.PwlFunction, fj: pwl.PwlFunction, xi: float, xj: float, t: float) -> float:
    wi = xi - t
    wj = xj + t
    return wi * pwl.evaluate(fi, wi) + wj * pwl.evaluate(fj, wj)


def _best_transfer(
    fi: pwl.PwlFunction, fj: pwl.PwlFunction, xi: float, xj: float, t_max: float
) -> tuple[float, float]:
    """Optimal mass transfer from i to j, solved piece by piece.

    On a fixed pair of linear pieces the objective is a quadratic in the
    transferred mass, so the maximum is at a piece boundary or at the
    vertex. Returns (t, gain relative to t = 0).
    """
    if not t_max > 0.0:
        return 0.0, 0.0
    cuts = {0.0, t_max}
    for bx in fi.xs:
        t = xi - bx
        if 0.0 < t < t_max:
            cuts.add(t)
    for bx in fj.xs:
        t = bx - xj
        if 0.0 < t < t_max:
            cuts.add(t)
    ts = sorted(cuts)
    base = _pair_objective(fi, fj, xi, xj, 0.0)
    best_t, best_v = 0.0, base
    for t0, t1 in zip(ts, ts[1:]):
        tm = 0.5 * (t0 + t1)
        si = _segment_slope(fi, xi - tm)
        sj = _segment_slope(fj, xj + tm)
        curvature = si + sj
        for t in (t0, t1):
            v = _pair_objective(fi, fj, xi, xj, t)
            if v > best_v:
                best_t, best_v = t, v
        if curvature < 0.0:
            # Q'(t) = f_j(x_j+t) + (x_j+t) s_j - f_i(x_i-t) - (x_i-t) s_i
            w = xi - t0
            v = xj + t0
            dq = (
                pwl.evaluate(fj, v)
                + v * sj
                - pwl.evaluate(fi, w)
                - w * si
            )
            t_star = t0 - dq / (2.0 * curvature)
            if t0 < t_star < t1:
                val = _pair_objective(fi, fj, xi, xj, t_star)
                if val > best_v:
                    best_t, best_v = t_star, val
    return best_t, best_v - base


def opt_refine(instance: CityInstance, coarse: OptResult) -> OptResult:
    """Closed-form pairwise improvement around a coarse optimum.

    Repeats sweeps of all ordered location pairs until no transfer gains
    more than the tolerance. The value never decreases.
    """
    x = list(coarse.allocation.x)
    n = instance.n
    fs = instance.utilities
    caps = instance.capacities
    for _ in range(MAX_REFINE_SWEEPS):
        improved = False
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                t_max = min(x[i], caps[j] - x[j])
                t, gain = _best_transfer(fs[i], fs[j], x[i], x[j], t_max)
                if gain > REFINE_GAIN_TOL:
                    x[i] = max(0.0, x[i] - t)
                    x[j] = min(caps[j], x[j] + t)
                    improved = True
        if not improved:
            break
    alloc = Allocation(tuple(x))
    value = model.welfare(instance, alloc)
    if value < coarse.value:
        return OptResult(coarse.value, coarse.allocation, coarse.grid, True)
    return OptResult(value, alloc, coarse.grid, True)


def opt(instance: CityInstance, grid: Optional[float] = None) -> OptResult:
    """Convenience: dynamic program followed by refinement."""
    return opt_refine(instance, opt_dp(instance, grid))


def welfare_upper_bound_greedy(instance: CityInstance) -> float:
    """Certified upper bound: fill capacities in order of peak height.

    Welfare is at most sum(x_i * h_i), and that is maximised by loading
    the highest peaks first.
    """
    peaked = sorted(
        ((pwl.peak_profile(nb.utility).h, i, nb.capacity) for i, nb in enumerate(instance.neighbourhoods)),
        key=lambda rec: (-rec[0], rec[1]),
    )
    remaining = instance.population
    total = 0.0
    for h, _, cap in peaked:
        take = min(cap, remaining)
        total += take * h
        remaining -= take
        if remaining <= 0.0:
            break
    return total


def opt_bruteforce(instance: CityInstance, resolution: float) -> float:
    """Exhaustive scan of the grid simplex (n <= 3): the test oracle."""
    if instance.n > 3:
        raise InstanceTooLarge(f"brute force supports n <= 3, got n={instance.n}")
    if not resolution > 0.0:
        raise ValueError("resolution must be positive")
    best = -math.inf
    for rows in grid_allocations(instance, resolution):
        p = _payoff_matrix(instance, rows)
        best = max(best, float((rows * p).sum(axis=1).max()))
    if not math.isfinite(best):
        raise GridTooFine("no feasible grid allocation at this resolution")
    return best


def welfare_slope_bound(instance: CityInstance) -> float:
    """Bound on |d(x f(x))/dx| over all segments of all utilities."""
    bound = 0.0
    for nb in instance.neighbourhoods:
        for (x0, y0), (x1, y1) in zip(nb.utility.points, nb.utility.points[1:]):
            s = (y1 - y0) / (x1 - x0)
            bound = max(bound, abs(y0 + x0 * s), abs(y1 + x1 * s))
    return bound
