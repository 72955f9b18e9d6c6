"""Exact geometry for concave piecewise-linear utility functions.

Every utility in the game is a piecewise-linear (PWL) function on [0, u]
given by its breakpoints. Restricting to PWL keeps all the geometric
primitives exact: evaluation is segment interpolation, integrals are sums
of trapezoids, level crossings are solved per segment in closed form, and
the area between two functions is computed by splitting at breakpoints and
sign changes. No quadrature, no root finding.

Conventions:
  * breakpoints are (mass, value) pairs with strictly increasing mass,
    the first at mass 0 and the last at the capacity u;
  * values are non-negative;
  * slopes are non-increasing (concavity), except for functions produced
    by ``raise_to_target`` which deliberately break concavity and are
    admitted through the relaxed validation path.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

from .errors import (
    DomainMismatch,
    DomainNotAtZero,
    NegativeValue,
    NonConcave,
    OutOfDomain,
    TargetAboveMax,
    UnsortedDomain,
)

# Relative tolerance for slope comparisons in the concavity check.
SLOPE_TOL = 1e-12


@dataclass(frozen=True)
class PwlFunction:
    """An immutable piecewise-linear function on [0, u].

    Construct through :func:`validate` (full contract) or
    :func:`validate_relaxed` (concavity waived). The constructor itself
    performs no checks so that internal code can rebuild trusted values.
    """

    points: tuple[tuple[float, float], ...]

    @property
    def u(self) -> float:
        """Right end of the domain (the owning location's capacity)."""
        return self.points[-1][0]

    @property
    def xs(self) -> tuple[float, ...]:
        return tuple(p[0] for p in self.points)

    @property
    def ys(self) -> tuple[float, ...]:
        return tuple(p[1] for p in self.points)

    def __call__(self, x: float) -> float:
        return evaluate(self, x)


@dataclass(frozen=True)
class PeakProfile:
    """Summary geometry of a utility: peak and end values.

    h is the maximum value, sigma the leftmost mass attaining it, ell and
    ell_prime the values at 0 and at u.
    """

    h: float
    sigma: float
    ell: float
    ell_prime: float


@dataclass(frozen=True)
class RudimentaryResult:
    """Outcome of raising a utility's flanks to a constant target.

    g equals tau on [0, alpha) and (beta, u] and equals the original
    function in between; cost is the exact area between the two.
    """

    g: PwlFunction
    tau: float
    alpha: float
    beta: float
    cost: float


def _check_shape(breakpoints) -> list[tuple[float, float]]:
    pts = [(float(x), float(y)) for x, y in breakpoints]
    if len(pts) < 2:
        raise UnsortedDomain(f"need at least 2 breakpoints, got {len(pts)}")
    if pts[0][0] != 0.0:
        raise DomainNotAtZero(f"domain must start at 0, got {pts[0][0]!r}")
    for (x0, _), (x1, _) in zip(pts, pts[1:]):
        if not x1 > x0:
            raise UnsortedDomain(f"masses not strictly increasing at x={x1!r}")
    for x, y in pts:
        if y < 0.0:
            raise NegativeValue(f"negative value {y!r} at mass {x!r}")
    return pts


def validate(breakpoints) -> PwlFunction:
    """Build a PwlFunction, enforcing the full contract including concavity.

    Raises UnsortedDomain, DomainNotAtZero, NegativeValue or NonConcave.
    """
    pts = _check_shape(breakpoints)
    prev_slope = None
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        slope = (y1 - y0) / (x1 - x0)
        if prev_slope is not None:
            tol = SLOPE_TOL * max(1.0, abs(prev_slope), abs(slope))
            if slope > prev_slope + tol:
                raise NonConcave(
                    f"slope increases from {prev_slope!r} to {slope!r} at mass {x0!r}"
                )
        prev_slope = slope
    return PwlFunction(tuple(pts))


def validate_relaxed(breakpoints) -> PwlFunction:
    """Build a PwlFunction without the concavity requirement.

    Used for raised utilities, whose flat flanks generally break concavity
    at the crossing points while remaining valid (non-negative) utilities.
    """
    return PwlFunction(tuple(_check_shape(breakpoints)))


def evaluate(f: PwlFunction, x: float) -> float:
    """Value of f at mass x by linear interpolation; exact at breakpoints."""
    xs = f.points
    if x < 0.0 or x > xs[-1][0]:
        raise OutOfDomain(f"x={x!r} outside [0, {xs[-1][0]!r}]")
    # rightmost segment whose start is <= x
    lo, hi = 0, len(xs) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if xs[mid][0] <= x:
            lo = mid
        else:
            hi = mid - 1
    if lo == len(xs) - 1:
        return xs[lo][1]
    x0, y0 = xs[lo]
    x1, y1 = xs[lo + 1]
    if x == x0:
        return y0
    if x == x1:
        return y1
    return y0 + (y1 - y0) * ((x - x0) / (x1 - x0))


def peak_profile(f: PwlFunction) -> PeakProfile:
    """Peak height h, leftmost argmax sigma, and the two end values.

    A concave PWL function attains its maximum at a breakpoint, so the
    scan over breakpoints is exact.
    """
    h = max(y for _, y in f.points)
    sigma = next(x for x, y in f.points if y == h)
    return PeakProfile(h=h, sigma=sigma, ell=f.points[0][1], ell_prime=f.points[-1][1])


def _first_crossing(f: PwlFunction, tau: float, hi: float) -> float:
    """Smallest x in [0, hi] with f(x) = tau, given f(0) < tau <= f(hi).

    Walks segments left to right; on a flat segment at exactly tau this
    returns the segment's left end (the leftmost point of the level set).
    """
    pts = f.points
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x0 > hi:
            break
        if y0 >= tau:
            return x0
        if y1 >= tau:
            # y0 < tau <= y1 on this segment
            return x0 + (tau - y0) * (x1 - x0) / (y1 - y0)
    return hi


def _last_crossing(f: PwlFunction, tau: float, lo: float) -> float:
    """Largest x in [lo, u] with f(x) = tau, given f(u) < tau <= f(lo).

    Walks segments right to left; on a flat segment at exactly tau this
    returns the segment's right end (the rightmost point of the level set).
    """
    pts = f.points
    for i in range(len(pts) - 2, -1, -1):
        x0, y0 = pts[i]
        x1, y1 = pts[i + 1]
        if x1 < lo:
            break
        if y1 >= tau:
            return x1
        if y0 >= tau:
            # y1 < tau <= y0 on this segment
            return x0 + (tau - y0) * (x1 - x0) / (y1 - y0)
    return lo


def raise_to_target(f: PwlFunction, tau: float) -> RudimentaryResult:
    """Raise f's low flanks to the constant target tau.

    Crossing masses alpha (rising side, leftmost) and beta (falling side,
    rightmost) bracket the untouched middle; outside them the new function
    is the constant tau. The cost is the exact area between f and the
    result, which is the investment cost of this improvement.
    """
    if tau < 0.0:
        raise NegativeValue(f"target payoff must be non-negative, got {tau!r}")
    prof = peak_profile(f)
    if tau > prof.h:
        raise TargetAboveMax(f"target {tau!r} exceeds maximum value {prof.h!r}")
    u = f.u

    alpha = _first_crossing(f, tau, prof.sigma) if prof.ell < tau else 0.0
    beta = _last_crossing(f, tau, prof.sigma) if prof.ell_prime < tau else u

    if alpha == 0.0 and beta == u:
        return RudimentaryResult(g=f, tau=tau, alpha=alpha, beta=beta, cost=0.0)

    pts: list[tuple[float, float]] = []
    if alpha > 0.0:
        pts.append((0.0, tau))
        pts.append((alpha, tau))
    else:
        pts.append(f.points[0])
    pts.extend(p for p in f.points if alpha < p[0] < beta)
    if beta < u:
        pts.append((beta, tau))
        pts.append((u, tau))
    else:
        pts.append(f.points[-1])
    # collapse coincident masses (crossing exactly on a breakpoint)
    dedup = [pts[0]]
    for p in pts[1:]:
        if p[0] > dedup[-1][0]:
            dedup.append(p)
    g = validate_relaxed(dedup)

    cost = (alpha * tau - integral(f, 0.0, alpha)) + (
        (u - beta) * tau - integral(f, beta, u)
    )
    return RudimentaryResult(g=g, tau=tau, alpha=alpha, beta=beta, cost=cost)


def integral(f: PwlFunction, a: float, b: float) -> float:
    """Exact integral of f over [a, b] as a sum of trapezoids."""
    u = f.u
    if a < 0.0 or b > u or a > b:
        raise OutOfDomain(f"bad integration range [{a!r}, {b!r}] on [0, {u!r}]")
    if a == b:
        return 0.0
    xs = f.xs
    total = 0.0
    x_prev = a
    y_prev = evaluate(f, a)
    idx = bisect_right(xs, a)
    while idx < len(xs) and xs[idx] < b:
        x, y = f.points[idx]
        total += (y_prev + y) * 0.5 * (x - x_prev)
        x_prev, y_prev = x, y
        idx += 1
    total += (y_prev + evaluate(f, b)) * 0.5 * (b - x_prev)
    return total


def symmetric_difference_area(f: PwlFunction, g: PwlFunction) -> float:
    """Area between f and g: the symmetric-difference investment cost.

    Both functions must live on the same [0, u]. The integrand |f - g| is
    handled exactly by splitting at every breakpoint of either function
    and at every sign change of the difference within a piece.
    """
    if f.u != g.u:
        raise DomainMismatch(f"domains differ: {f.u!r} vs {g.u!r}")
    xs = sorted({x for x in f.xs} | {x for x in g.xs})
    area = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        d0 = evaluate(f, x0) - evaluate(g, x0)
        d1 = evaluate(f, x1) - evaluate(g, x1)
        if d0 * d1 < 0.0:
            xc = x0 + d0 * (x1 - x0) / (d0 - d1)
            area += abs(d0) * 0.5 * (xc - x0)
            area += abs(d1) * 0.5 * (x1 - xc)
        else:
            area += (abs(d0) + abs(d1)) * 0.5 * (x1 - x0)
    return area


def max_abs_slope(f: PwlFunction) -> float:
    """Largest |slope| over the segments of f (its Lipschitz constant)."""
    return max(
        abs((y1 - y0) / (x1 - x0))
        for (x0, y0), (x1, y1) in zip(f.points, f.points[1:])
    )
