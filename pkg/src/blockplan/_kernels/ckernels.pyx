# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Mirrors pykernels.py loop for loop: same operation order, same
tie-breaking, same clamping, so both backends produce the same
trajectories and tables (the extension is built with fp contraction off).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "c"


cdef inline double _eval(const double[::1] xs, const double[::1] ys,
                         Py_ssize_t lo, Py_ssize_t hi, double x) noexcept nogil:
    cdef Py_ssize_t a = lo
    cdef Py_ssize_t b = hi - 1
    cdef Py_ssize_t mid
    cdef double x0, x1
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


cdef inline double _integrate(const double[::1] xs, const double[::1] ys,
                              Py_ssize_t lo, Py_ssize_t hi,
                              double a, double b) noexcept nogil:
    cdef double total = 0.0
    cdef double x_prev, y_prev
    cdef Py_ssize_t idx
    if a == b:
        return 0.0
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


cdef double _select_pair(const double[::1] x, const double[::1] p,
                         const double[::1] caps, Py_ssize_t n,
                         Py_ssize_t* s_out, Py_ssize_t* t_out) noexcept nogil:
    cdef double b1 = 1e308 * 10  # +inf
    cdef double a1 = -b1
    cdef Py_ssize_t ib = -1, ia = -1, i
    cdef double gap, b2, a2, best, cand
    cdef Py_ssize_t ib2, ia2, s, t
    for i in range(n):
        if x[i] > 0.0 and p[i] < b1:
            b1 = p[i]
            ib = i
        if x[i] < caps[i] and p[i] > a1:
            a1 = p[i]
            ia = i
    if ib < 0 or ia < 0:
        s_out[0] = -1
        t_out[0] = -1
        return 0.0
    if ia != ib:
        gap = a1 - b1
        if gap < 0.0:
            gap = 0.0
        s_out[0] = ib
        t_out[0] = ia
        return gap
    b2 = 1e308 * 10
    a2 = -b2
    ib2 = -1
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
    best = -(1e308 * 10)
    s = -1
    t = -1
    if ib2 >= 0:
        best = a1 - b2
        s = ib2
        t = ia
    if ia2 >= 0:
        cand = a2 - b1
        if cand > best or (cand == best and ib < s):
            best = cand
            s = ib
            t = ia2
    if s < 0:
        s_out[0] = -1
        t_out[0] = -1
        return 0.0
    if best < 0.0:
        best = 0.0
    s_out[0] = s
    t_out[0] = t
    return best


def run_dynamics(const double[::1] xs, const double[::1] ys,
                 const long long[::1] off, const double[::1] caps,
                 x0, double step0, double decay, double eta,
                 long long max_iters, long long window, bint record):
    """Best-response dynamics; see pykernels.run_dynamics for semantics."""
    cdef Py_ssize_t n = caps.shape[0]
    x_arr = np.array(x0, dtype=np.float64)
    p_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] p = p_arr
    cdef double step = step0
    cdef double phi = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        phi += _integrate(xs, ys, off[i], off[i + 1], 0.0, x[i])

    hist_src_arr = np.full(max(window, 1), -1, dtype=np.int64)
    hist_tgt_arr = np.full(max(window, 1), -1, dtype=np.int64)
    cdef long long[::1] hist_src = hist_src_arr
    cdef long long[::1] hist_tgt = hist_tgt_arr
    cdef Py_ssize_t hist_pos = 0
    cdef long long cooldown = 0

    cdef Py_ssize_t cap = 0
    tr_x = tr_wel = tr_gap = tr_phi = tr_m = tr_step = None
    cdef double[:, ::1] vx
    cdef double[::1] vwel, vgap, vphi, vm, vstep
    if record:
        cap = min(max_iters + 1, 1 << 14)
        tr_x = np.empty((cap, n), dtype=np.float64)
        tr_wel = np.empty(cap, dtype=np.float64)
        tr_gap = np.empty(cap, dtype=np.float64)
        tr_phi = np.empty(cap, dtype=np.float64)
        tr_m = np.empty(cap, dtype=np.float64)
        tr_step = np.empty(cap, dtype=np.float64)
        vx = tr_x
        vwel = tr_wel
        vgap = tr_gap
        vphi = tr_phi
        vm = tr_m
        vstep = tr_step

    cdef Py_ssize_t iters = 0
    cdef bint converged = False
    cdef double final_gap = 0.0
    cdef double gap, m, room, dphi, xn, wel
    cdef Py_ssize_t s = -1, t = -1, k
    cdef bint reversed_flow

    while True:
        for i in range(n):
            p[i] = _eval(xs, ys, off[i], off[i + 1], x[i])
        gap = _select_pair(x, p, caps, n, &s, &t)
        if record:
            if iters >= cap:
                cap = min(max_iters + 1, 2 * cap)
                tr_x = np.concatenate([tr_x, np.empty((cap - tr_x.shape[0], n))])
                tr_wel = np.concatenate([tr_wel, np.empty(cap - tr_wel.shape[0])])
                tr_gap = np.concatenate([tr_gap, np.empty(cap - tr_gap.shape[0])])
                tr_phi = np.concatenate([tr_phi, np.empty(cap - tr_phi.shape[0])])
                tr_m = np.concatenate([tr_m, np.empty(cap - tr_m.shape[0])])
                tr_step = np.concatenate([tr_step, np.empty(cap - tr_step.shape[0])])
                vx = tr_x
                vwel = tr_wel
                vgap = tr_gap
                vphi = tr_phi
                vm = tr_m
                vstep = tr_step
            for i in range(n):
                vx[iters, i] = x[i]
            wel = 0.0
            for i in range(n):
                wel += x[i] * p[i]
            vwel[iters] = wel
            vgap[iters] = gap
            vphi[iters] = phi
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
            vm[iters] = m
            vstep[iters] = step
        iters += 1

    trace = None
    if record:
        rows = iters + 1
        trace = {
            "x": np.asarray(tr_x)[:rows].copy(),
            "welfare": np.asarray(tr_wel)[:rows].copy(),
            "gap": np.asarray(tr_gap)[:rows].copy(),
            "potential": np.asarray(tr_phi)[:rows].copy(),
            "move": np.asarray(tr_m)[:iters].copy(),
            "step": np.asarray(tr_step)[:iters].copy(),
        }
    return x_arr, iters, converged, final_gap, trace


def dp_layers(values, long long cells):
    """Max-plus fill of the allocation DP; see pykernels.dp_layers."""
    cdef Py_ssize_t n = len(values)
    layers_arr = np.full((n + 1, cells + 1), -np.inf, dtype=np.float64)
    cdef double[:, ::1] layers = layers_arr
    layers[0, 0] = 0.0
    cdef Py_ssize_t i, a, mcol, a_hi
    cdef double va, cand
    cdef const double[::1] vi
    for i in range(n):
        arr = np.ascontiguousarray(values[i], dtype=np.float64)
        vi = arr
        a_hi = vi.shape[0] - 1
        if a_hi > cells:
            a_hi = cells
        with nogil:
            for a in range(a_hi + 1):
                va = vi[a]
                for mcol in range(a, cells + 1):
                    cand = layers[i, mcol - a] + va
                    if cand > layers[i + 1, mcol]:
                        layers[i + 1, mcol] = cand
    return layers_arr


def regret_gaps(x, p, caps):
    """Per-row regret gaps; see pykernels.regret_gaps."""
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    p_arr = np.ascontiguousarray(p, dtype=np.float64)
    caps_arr = np.ascontiguousarray(caps, dtype=np.float64)
    cdef double[:, ::1] vx = x_arr
    cdef double[:, ::1] vp = p_arr
    cdef double[::1] vcaps = caps_arr
    cdef Py_ssize_t rows = vx.shape[0]
    cdef Py_ssize_t n = vx.shape[1]
    out_arr = np.empty(rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r, s, t
    with nogil:
        for r in range(rows):
            out[r] = _select_pair(vx[r], vp[r], vcaps, n, &s, &t)
    return out_arr
