"""Numba kernels behind the bandit loop, the coverage walks, and the
box-dual coordinate solvers.

Per-arm sample state lives in plain numpy arrays owned by the caller
(two heaps for running medians/quantiles, a raw append-only buffer for
huber refits and optional sample retention).  The bandit kernel runs
until it either stops, hits the round cap, or needs the caller to act
(reward buffer empty, array at capacity); it then returns a status code
so all allocation and random drawing stay on the Python side, which
keeps the seed -> stream contract in one place.

Estimator kinds: 0 mean, 1 median, 2 quantile, 3 huber.
Bonus kinds:     0 iterated-log index, 1 original lil'UCB index.
Status codes:    0 stopped, 1 refill rewards(arm), 2 grow estimator(arm),
                 3 round cap hit, 4 grow trace.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_STOPPED = 0
STATUS_REFILL = 1
STATUS_GROW = 2
STATUS_CAP = 3
STATUS_TRACE_FULL = 4

EST_MEAN = 0
EST_MEDIAN = 1
EST_QUANTILE = 2
EST_HUBER = 3

BONUS_LIL = 0
BONUS_VANILLA = 1


@njit(cache=True)
def _heap_push(heap, size, value):
    """Max-heap push; heap[0:size] is valid before the call."""
    heap[size] = value
    i = size
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] < heap[i]:
            tmp = heap[parent]
            heap[parent] = heap[i]
            heap[i] = tmp
            i = parent
        else:
            break


@njit(cache=True)
def _heap_pop(heap, size):
    """Max-heap pop; returns the old top, heap shrinks by one."""
    top = heap[0]
    last = size - 1
    heap[0] = heap[last]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= last:
            break
        right = left + 1
        big = left
        if right < last and heap[right] > heap[left]:
            big = right
        if heap[big] > heap[i]:
            tmp = heap[i]
            heap[i] = heap[big]
            heap[big] = tmp
            i = big
        else:
            break
    return top


@njit(cache=True)
def _quantile_target(q, n):
    """ceil(q*n) with float-fuzz guard, clipped to [1, n]."""
    k = int(np.ceil(q * n - 1e-9))
    if k < 1:
        k = 1
    elif k > n:
        k = n
    return k


@njit(cache=True)
def _heap_insert(lo, hi, nlo, nhi, q, value):
    """Insert into the two-heap order tracker; returns (nlo, nhi).

    ``lo`` is a max-heap holding the k smallest values (k = ceil(q*n));
    ``hi`` is a min-heap of the rest, stored negated.
    """
    if nlo == 0 or value <= lo[0]:
        _heap_push(lo, nlo, value)
        nlo += 1
    else:
        _heap_push(hi, nhi, -value)
        nhi += 1
    want = _quantile_target(q, nlo + nhi)
    while nlo > want:
        moved = _heap_pop(lo, nlo)
        nlo -= 1
        _heap_push(hi, nhi, -moved)
        nhi += 1
    while nlo < want:
        moved = -_heap_pop(hi, nhi)
        nhi -= 1
        _heap_push(lo, nlo, moved)
        nlo += 1
    return nlo, nhi


@njit(cache=True)
def _heap_estimate(lo, hi, nlo, nhi, kind):
    """Current location estimate from the two heaps."""
    n = nlo + nhi
    if kind == EST_MEDIAN and n % 2 == 0:
        return 0.5 * (lo[0] - hi[0])
    return lo[0]


@njit(cache=True)
def _huber_psi(raw, nraw, c, theta):
    """Sum of clipped residuals clip(theta - y_i, -c, c); non-decreasing in theta."""
    s = 0.0
    for i in range(nraw):
        d = theta - raw[i]
        if d > c:
            d = c
        elif d < -c:
            d = -c
        s += d
    return s


@njit(cache=True)
def _huber_refit(raw, nraw, c, lo_val, hi_val, warm):
    """Root of the clipped-residual sum by warm-started bisection."""
    if lo_val == hi_val:
        return lo_val
    tol = 1e-10 * (1.0 + (hi_val - lo_val))
    # try a small bracket around the previous estimate first
    lo_b = lo_val
    hi_b = hi_val
    if warm > lo_val and warm < hi_val:
        f_warm = _huber_psi(raw, nraw, c, warm)
        if f_warm == 0.0:
            return warm
        width = (hi_val - lo_val) / max(nraw, 8)
        if f_warm > 0.0:
            hi_b = warm
            probe = warm - width
            while probe > lo_val:
                if _huber_psi(raw, nraw, c, probe) <= 0.0:
                    lo_b = probe
                    break
                width *= 4.0
                probe = warm - width
        else:
            lo_b = warm
            probe = warm + width
            while probe < hi_val:
                if _huber_psi(raw, nraw, c, probe) >= 0.0:
                    hi_b = probe
                    break
                width *= 4.0
                probe = warm + width
    while hi_b - lo_b > tol:
        mid = 0.5 * (lo_b + hi_b)
        f = _huber_psi(raw, nraw, c, mid)
        if f < 0.0:
            lo_b = mid
        elif f > 0.0:
            hi_b = mid
        else:
            return mid
    return 0.5 * (lo_b + hi_b)


@njit(cache=True)
def _bonus(bonus_kind, pa, pb, pc, t):
    """Exploration bonus at pull count t.

    kind 0: pa*sqrt((max(0, lnln 2t) + pb)/t)   pa = gamma, pb = 0.72*ln(10.4/delta)
    kind 1: pa*sqrt((ln(ln(pc*t + 2)) + pb)/t)  pa = (1+b)(1+sqrt(e))*sqrt(2 s^2 (1+e)),
                                                pb = ln(1/delta), pc = 1+e
    """
    tf = float(t)
    if bonus_kind == BONUS_LIL:
        inner = np.log(np.log(2.0 * tf))
        if inner < 0.0:
            inner = 0.0
        return pa * np.sqrt((inner + pb) / tf)
    return pa * np.sqrt((np.log(np.log(pc * tf + 2.0)) + pb) / tf)


@njit(cache=True)
def _record_raw(raw_j, nraw, j, value, armlo, armhi):
    raw_j[nraw[j]] = value
    nraw[j] += 1
    if value < armlo[j]:
        armlo[j] = value
    if value > armhi[j]:
        armhi[j] = value


@njit(cache=True)
def run_chunk(
    est_kind,
    q,
    huber_c,
    bonus_kind,
    pa,
    pb,
    pc,
    lam,
    round_cap,
    pulls,
    est,
    idx,
    counters,  # int64[3]: rounds, max pulls, trace position
    mean_sum,
    lo,
    hi,
    nlo,
    nhi,
    raw,
    nraw,
    armlo,
    armhi,
    keep_raw,
    buffers,
    bpos,
    blen,
    trace,
    trace_on,
):
    """Run the sample-estimate-index loop until a stop or a caller action.

    Stopping rule (checked before every pull): stop as soon as
    (1+lam)*max_k T_k - lam*sum_k T_k >= 1.
    """
    n = counters[0]
    max_t = counters[1]
    tpos = counters[2]
    K = pulls.size
    while True:
        if (1.0 + lam) * max_t - lam * n >= 1.0:
            counters[0] = n
            counters[1] = max_t
            counters[2] = tpos
            return STATUS_STOPPED, -1
        if n >= round_cap:
            counters[0] = n
            counters[1] = max_t
            counters[2] = tpos
            return STATUS_CAP, -1
        # lowest-index argmax over the cached per-arm indices
        j = 0
        best = idx[0]
        for k in range(1, K):
            if idx[k] > best:
                best = idx[k]
                j = k
        if bpos[j] >= blen[j]:
            counters[0] = n
            counters[1] = max_t
            counters[2] = tpos
            return STATUS_REFILL, j
        if est_kind == EST_MEDIAN or est_kind == EST_QUANTILE:
            if nlo[j] + 1 > lo[j].size or nhi[j] + 1 > hi[j].size:
                counters[0] = n
                counters[1] = max_t
                counters[2] = tpos
                return STATUS_GROW, j
        if (est_kind == EST_HUBER or keep_raw == 1) and nraw[j] + 1 > raw[j].size:
            counters[0] = n
            counters[1] = max_t
            counters[2] = tpos
            return STATUS_GROW, j
        if trace_on == 1 and tpos >= trace.size:
            counters[0] = n
            counters[1] = max_t
            counters[2] = tpos
            return STATUS_TRACE_FULL, j
        value = buffers[j][bpos[j]]
        bpos[j] += 1
        t_new = pulls[j] + 1
        if est_kind == EST_MEAN:
            mean_sum[j] += value
            est[j] = mean_sum[j] / t_new
            if keep_raw == 1:
                _record_raw(raw[j], nraw, j, value, armlo, armhi)
        elif est_kind == EST_HUBER:
            raw_j = raw[j]
            _record_raw(raw_j, nraw, j, value, armlo, armhi)
            est[j] = _huber_refit(raw_j, nraw[j], huber_c, armlo[j], armhi[j], est[j])
        else:
            if keep_raw == 1:
                _record_raw(raw[j], nraw, j, value, armlo, armhi)
            lo_j = lo[j]
            hi_j = hi[j]
            a, b = _heap_insert(lo_j, hi_j, nlo[j], nhi[j], q, value)
            nlo[j] = a
            nhi[j] = b
            est[j] = _heap_estimate(lo_j, hi_j, a, b, est_kind)
        pulls[j] = t_new
        n += 1
        if t_new > max_t:
            max_t = t_new
        idx[j] = est[j] + _bonus(bonus_kind, pa, pb, pc, t_new)
        if trace_on == 1:
            trace[tpos] = j
            tpos += 1


@njit(cache=True)
def warmup_arm(est_kind, q, huber_c, j, values, total_after, mean_sum, lo, hi, nlo, nhi, raw, nraw, armlo, armhi, keep_raw, est):
    """Feed a warm-up block to arm j (arrays must already have capacity).

    ``total_after`` is the arm's pull count once the block is absorbed.
    """
    raw_j = raw[j]
    if est_kind == EST_MEAN:
        for i in range(values.size):
            v = values[i]
            mean_sum[j] += v
            if keep_raw == 1:
                _record_raw(raw_j, nraw, j, v, armlo, armhi)
        est[j] = mean_sum[j] / total_after
    elif est_kind == EST_HUBER:
        for i in range(values.size):
            v = values[i]
            _record_raw(raw_j, nraw, j, v, armlo, armhi)
            est[j] = _huber_refit(raw_j, nraw[j], huber_c, armlo[j], armhi[j], est[j])
    else:
        lo_j = lo[j]
        hi_j = hi[j]
        for i in range(values.size):
            v = values[i]
            if keep_raw == 1:
                _record_raw(raw_j, nraw, j, v, armlo, armhi)
            a, b = _heap_insert(lo_j, hi_j, nlo[j], nhi[j], q, v)
            nlo[j] = a
            nhi[j] = b
            est[j] = _heap_estimate(lo_j, hi_j, a, b, est_kind)


@njit(cache=True)
def coverage_walk(est_kind, q, huber_c, samples, radii, n0, theta_star, checkpoints):
    """Walk one data sequence, refitting as samples arrive.

    Checks |estimate_n - theta_star| <= radii[n-1] at every n >= n0 (or
    only at the given checkpoints when that array is nonempty); returns
    the first violating n, or 0 when the whole sweep is covered.
    """
    n_max = samples.size
    lo = np.empty(n_max, np.float64)
    hi = np.empty(n_max, np.float64)
    raw = np.empty(n_max if est_kind == EST_HUBER else 1, np.float64)
    nlo = 0
    nhi = 0
    nraw = 0
    mean_sum = 0.0
    vlo = np.inf
    vhi = -np.inf
    estimate = 0.0
    cp_pos = 0
    use_checkpoints = checkpoints.size > 0
    for i in range(n_max):
        v = samples[i]
        n = i + 1
        if v < vlo:
            vlo = v
        if v > vhi:
            vhi = v
        if est_kind == EST_MEAN:
            mean_sum += v
            estimate = mean_sum / n
        elif est_kind == EST_HUBER:
            raw[nraw] = v
            nraw += 1
            estimate = _huber_refit(raw, nraw, huber_c, vlo, vhi, estimate)
        else:
            nlo, nhi = _heap_insert(lo, hi, nlo, nhi, q, v)
            estimate = _heap_estimate(lo, hi, nlo, nhi, est_kind)
        if n < n0:
            continue
        if use_checkpoints:
            if cp_pos >= checkpoints.size or n != checkpoints[cp_pos]:
                continue
            cp_pos += 1
        dev = estimate - theta_star
        if dev < 0.0:
            dev = -dev
        if dev > radii[i]:
            return n
    return 0


@njit(cache=True)
def cd_absolute(X, y, lam, zeta, v, max_epochs, tol, check_every):
    """Cyclic coordinate ascent on the box dual of |.|-loss + ridge.

    Dual: maximise  zeta.y - ||X^T zeta||^2 / (4 lam)  over |zeta_i| <= 1/n;
    primal point theta(zeta) = X^T zeta / (2 lam).  Returns
    (duality gap, epochs used); zeta and v = X^T zeta are updated in place.
    """
    n, d = X.shape
    bound = 1.0 / n
    gap = np.inf
    last_dual = -np.inf
    for epoch in range(1, max_epochs + 1):
        for i in range(n):
            xsq = 0.0
            dot = 0.0
            for c in range(d):
                xsq += X[i, c] * X[i, c]
                dot += X[i, c] * v[c]
            if xsq <= 0.0:
                new = bound if y[i] > 0.0 else (-bound if y[i] < 0.0 else 0.0)
            else:
                new = (2.0 * lam * y[i] - (dot - zeta[i] * xsq)) / xsq
                if new > bound:
                    new = bound
                elif new < -bound:
                    new = -bound
            delta = new - zeta[i]
            if delta != 0.0:
                for c in range(d):
                    v[c] += delta * X[i, c]
                zeta[i] = new
        if epoch % check_every == 0 or epoch == max_epochs:
            primal = 0.0
            dual = 0.0
            vsq = 0.0
            for c in range(d):
                vsq += v[c] * v[c]
            for i in range(n):
                u = 0.0
                for c in range(d):
                    u += X[i, c] * v[c]
                u /= 2.0 * lam
                r = y[i] - u
                primal += (r if r >= 0.0 else -r) / n
                dual += zeta[i] * y[i]
            primal += vsq / (4.0 * lam)
            dual -= vsq / (4.0 * lam)
            # exact per-coordinate maximisation: ascent must be monotone
            assert dual >= last_dual - 1e-9 * (1.0 + abs(dual))
            last_dual = dual
            gap = primal - dual
            if gap <= tol:
                return gap, epoch
    return gap, max_epochs


@njit(cache=True)
def cd_hinge(X, y, lam, beta, v, max_epochs, tol, check_every):
    """Cyclic coordinate ascent on the box dual of hinge loss + ridge.

    Dual: maximise  sum beta_i - ||sum beta_i y_i x_i||^2 / (4 lam)  over
    0 <= beta_i <= 1/n, with v = sum beta_i y_i x_i and
    theta(beta) = v / (2 lam).
    """
    n, d = X.shape
    bound = 1.0 / n
    gap = np.inf
    last_dual = -np.inf
    for epoch in range(1, max_epochs + 1):
        for i in range(n):
            xsq = 0.0
            dot = 0.0
            for c in range(d):
                xsq += X[i, c] * X[i, c]
                dot += X[i, c] * v[c]
            denom = y[i] * y[i] * xsq
            if denom <= 0.0:
                new = bound  # gradient is +1: loss is constant, push to the box edge
            else:
                new = (2.0 * lam - y[i] * (dot - beta[i] * y[i] * xsq)) / denom
                if new > bound:
                    new = bound
                elif new < 0.0:
                    new = 0.0
            delta = new - beta[i]
            if delta != 0.0:
                for c in range(d):
                    v[c] += delta * y[i] * X[i, c]
                beta[i] = new
        if epoch % check_every == 0 or epoch == max_epochs:
            vsq = 0.0
            for c in range(d):
                vsq += v[c] * v[c]
            primal = vsq / (4.0 * lam)
            dual = -vsq / (4.0 * lam)
            for i in range(n):
                u = 0.0
                for c in range(d):
                    u += X[i, c] * v[c]
                u /= 2.0 * lam
                m = 1.0 - y[i] * u
                if m > 0.0:
                    primal += m / n
                dual += beta[i]
            assert dual >= last_dual - 1e-9 * (1.0 + abs(dual))
            last_dual = dual
            gap = primal - dual
            if gap <= tol:
                return gap, epoch
    return gap, max_epochs
