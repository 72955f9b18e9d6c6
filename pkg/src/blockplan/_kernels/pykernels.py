"""Pure-Python/numpy kernel backend.

Semantics here are the reference; ckernels.pyx mirrors this file loop for
loop (same operation order, same tie-breaking) so that both backends
produce the same trajectories and tables.

Utilities arrive packed: concatenated breakpoint arrays ``xs``/``ys`` plus
an ``off`` array of length n+1 so location i owns xs[off[i]:off[i+1]].
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def _eval(xs, ys, lo: int, hi: int, x: float) -> float:
    """Interpolate location's utility at mass x; exact at breakpoints."""
    a, b = lo, hi - 1
    while a < b:
        mid = (a + b + 1) // 2
        if xs[mid] <= x:
            a = mid
        else:
            b = mid - 1
    if a == hi - 1:
        return ys[a]
    x0 = xs[a]
    x1 = xs[a + 1]
    if x == x0:
        return ys[a]
    if x == x1:
        return ys[a + 1]
    return ys[a] + (ys[a + 1] - ys[a]) * ((x - x0) / (x1 - x0))


def _integrate(xs, ys, lo: int, hi: int, a: float, b: float) -> float:
    """Exact trapezoid integral of a location's utility over [a, b]."""
    if a == b:
        return 0.0
    total = 0.0
    x_prev = a
    y_prev = _eval(xs, ys, lo, hi, a)
    idx = lo
    while idx < hi and xs[idx] <= a:
        idx += 1
    while idx < hi and xs[idx] < b:
        total += (y_prev + ys[idx]) * 0.5 * (xs[idx] - x_prev)
        x_prev = xs[idx]
        y_prev = ys[idx]
        idx += 1
    total += (y_prev + _eval(xs, ys, lo, hi, b)) * 0.5 * (b - x_prev)
    return total


def _select_pair(x, p, caps, n: int):
    """Max-regret (source, target) pair with lowest-index tie-breaking.

    Returns (gap, source, target); gap is clamped at 0 and indices are -1
    when no admissible pair exists (e.g. a single location).
    """
    b1 = np.inf
    ib = -1
    a1 = -np.inf
    ia = -1
    for i in range(n):
        if x[i] > 0.0 and p[i] < b1:
            b1 = p[i]
            ib = i
        if x[i] < caps[i] and p[i] > a1:
            a1 = p[i]
            ia = i
    if ib < 0 or ia < 0:
        return 0.0, -1, -1
    if ia != ib:
        gap = a1 - b1
        if gap < 0.0:
            gap = 0.0
        return gap, ib, ia
    # a single location is both first-argmin-occupied and first-argmax-free
    b2 = np.inf
    ib2 = -1
    a2 = -np.inf
    ia2 = -1
    for i in range(n):
        if i == ia:
            continue
        if x[i] > 0.0 and p[i] < b2:
            b2 = p[i]
            ib2 = i
        if x[i] < caps[i] and p[i] > a2:
            a2 = p[i]
            ia2 = i
    best = -np.inf
    s = t = -1
    if ib2 >= 0:
        best = a1 - b2
        s, t = ib2, ia
    if ia2 >= 0:
        cand = a2 - b1
        # ib != ib2 always, so ties resolve on the source index alone
        if cand > best or (cand == best and ib < s):
            best = cand
            s, t = ib, ia2
    if s < 0:
        return 0.0, -1, -1
    if best < 0.0:
        best = 0.0
    return best, s, t


def run_dynamics(xs, ys, off, caps, x0, step0, decay, eta, max_iters, window, record):
    """Best-response dynamics: move mass along the max-regret pair.

    Each iteration moves m = min(step, x[source], cap[target] - x[target])
    from the worst-off occupied location to the best non-full one. The
    step shrinks by ``decay`` whenever the flow direction reverses at some
    location within the last ``window`` moves (the current source was
    recently a target, or vice versa); after a shrink further shrinks are
    suppressed for ``window`` moves so a single cascade cannot collapse
    the step. Stops when the regret gap is at most eta.

    Returns (x, iterations, converged, trace) where trace is None unless
    ``record``; the trace dict carries per-iteration state snapshots, the
    pre-move gap, the executed move mass and the step in force, and the
    exactly-accumulated potential.
    """
    n = len(caps)
    x = np.array(x0, dtype=np.float64)
    p = np.empty(n, dtype=np.float64)
    step = float(step0)
    phi = 0.0
    for i in range(n):
        phi += _integrate(xs, ys, off[i], off[i + 1], 0.0, x[i])

    hist_src = np.full(window, -1, dtype=np.int64) if window > 0 else np.empty(0, dtype=np.int64)
    hist_tgt = np.full(window, -1, dtype=np.int64) if window > 0 else np.empty(0, dtype=np.int64)
    hist_pos = 0
    cooldown = 0

    if record:
        cap = min(max_iters + 1, 1 << 14)
        tr_x = np.empty((cap, n), dtype=np.float64)
        tr_wel = np.empty(cap, dtype=np.float64)
        tr_gap = np.empty(cap, dtype=np.float64)
        tr_phi = np.empty(cap, dtype=np.float64)
        tr_m = np.empty(cap, dtype=np.float64)
        tr_step = np.empty(cap, dtype=np.float64)

    iters = 0
    converged = False
    final_gap = 0.0
    while True:
        for i in range(n):
            p[i] = _eval(xs, ys, off[i], off[i + 1], x[i])
        gap, s, t = _select_pair(x, p, caps, n)
        if record:
            if iters >= len(tr_wel):
                cap = min(max_iters + 1, 2 * len(tr_wel))
                grow = cap - len(tr_wel)
                tr_x = np.concatenate([tr_x, np.empty((grow, n))])
                tr_wel = np.concatenate([tr_wel, np.empty(grow)])
                tr_gap = np.concatenate([tr_gap, np.empty(grow)])
                tr_phi = np.concatenate([tr_phi, np.empty(grow)])
                tr_m = np.concatenate([tr_m, np.empty(grow)])
                tr_step = np.concatenate([tr_step, np.empty(grow)])
            tr_x[iters] = x
            wel = 0.0
            for i in range(n):
                wel += x[i] * p[i]
            tr_wel[iters] = wel
            tr_gap[iters] = gap
            tr_phi[iters] = phi
        if gap <= eta:
            converged = True
            final_gap = gap
            break
        if iters >= max_iters:
            final_gap = gap
            break

        if cooldown == 0 and window > 0:
            reversed_flow = False
            for k in range(window):
                if hist_tgt[k] == s or hist_src[k] == t:
                    reversed_flow = True
                    break
            if reversed_flow:
                step *= decay
                cooldown = window
        elif cooldown > 0:
            cooldown -= 1

        m = step
        if x[s] < m:
            m = x[s]
        room = caps[t] - x[t]
        if room < m:
            m = room

        dphi = _integrate(xs, ys, off[t], off[t + 1], x[t], x[t] + m) - _integrate(
            xs, ys, off[s], off[s + 1], x[s] - m, x[s]
        )
        xn = x[s] - m
        x[s] = 0.0 if xn < 0.0 else xn
        xn = x[t] + m
        x[t] = caps[t] if xn > caps[t] else xn
        phi += dphi

        if window > 0:
            hist_src[hist_pos] = s
            hist_tgt[hist_pos] = t
            hist_pos = (hist_pos + 1) % window
        if record:
            tr_m[iters] = m
            tr_step[iters] = step
        iters += 1

    trace = None
    if record:
        rows = iters + 1
        trace = {
            "x": tr_x[:rows].copy(),
            "welfare": tr_wel[:rows].copy(),
            "gap": tr_gap[:rows].copy(),
            "potential": tr_phi[:rows].copy(),
            "move": tr_m[:iters].copy(),
            "step": tr_step[:iters].copy(),
        }
    return x, iters, converged, final_gap, trace


def dp_layers(values: list[np.ndarray], cells: int) -> np.ndarray:
    """Max-plus fill of the allocation dynamic program.

    values[i][a] is location i's welfare contribution when it takes a grid
    units. Layer i+1, column m is the best total over locations 0..i using
    exactly m units; unreachable states are -inf.
    """
    n = len(values)
    layers = np.full((n + 1, cells + 1), -np.inf, dtype=np.float64)
    layers[0, 0] = 0.0
    for i in range(n):
        vi = values[i]
        prev = layers[i]
        cur = layers[i + 1]
        a_hi = min(len(vi) - 1, cells)
        for a in range(a_hi + 1):
            np.maximum(cur[a:], prev[: cells + 1 - a] + vi[a], out=cur[a:])
    return layers


def regret_gaps(x: np.ndarray, p: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Regret gap for each allocation row of x with payoff rows p.

    The gap of a row is max over occupied i and non-full j != i of
    p[j] - p[i], clamped at 0.
    """
    occupied = x > 0.0
    nonfull = x < caps[None, :]
    pn = np.where(nonfull, p, -np.inf)
    po = np.where(occupied, p, np.inf)
    ia = np.argmax(pn, axis=1)
    ib = np.argmin(po, axis=1)
    rows = np.arange(x.shape[0])
    a1 = pn[rows, ia]
    b1 = po[rows, ib]
    pn2 = pn.copy()
    pn2[rows, ia] = -np.inf
    a2 = np.max(pn2, axis=1)
    po2 = po.copy()
    po2[rows, ib] = np.inf
    b2 = np.min(po2, axis=1)
    with np.errstate(invalid="ignore"):
        gap = np.where(ia != ib, a1 - b1, np.maximum(a1 - b2, a2 - b1))
    gap = np.where(np.isfinite(gap), gap, -np.inf)
    return np.clip(gap, 0.0, None)
