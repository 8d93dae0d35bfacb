"""Numba hot loops for the simulator.

The RNG is splitmix64: the stream state advances by the 64-bit golden-ratio
constant and each output is the finalizer mix of the state.  The generator
algorithm is part of the reproducibility contract; ``achlio.process`` carries
a bit-identical pure-Python mirror.
"""

import numpy as np
from numba import int64, njit, uint64

GOLD = uint64(0x9E3779B97F4A7C15)
_MIX1 = uint64(0xBF58476D1CE4E5B9)
_MIX2 = uint64(0x94D049BB133111EB)

# rule codes for the builtin decision logic
ER, PRODUCT, SUM, BOUNDED, DCDGM, ADJACENT = 0, 1, 2, 3, 4, 5


@njit(uint64(uint64), cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> uint64(30))) * _MIX1
    z = (z ^ (z >> uint64(27))) * _MIX2
    return z ^ (z >> uint64(31))


@njit(cache=True, inline="always")
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def run_builtin(n, rule_code, B, table, steps_total, snap_steps, K_report,
                eta_thresh, state0, distinct):
    """One seeded run of a catalogued rule; returns snapshot arrays + census."""
    parent = np.empty(n, np.int64)
    for i in range(n):
        parent[i] = i
    size = np.ones(n, np.int64)
    count = np.zeros(n + 1, np.int64)
    count[1] = n
    l1 = np.int64(1)
    sum_k2 = np.int64(n)
    big = np.int64(n) if eta_thresh <= 1 else np.int64(0)

    S = snap_steps.shape[0]
    nk = np.zeros((S, K_report))
    tail = np.zeros(S)
    l1f = np.zeros(S)
    chi = np.zeros(S)
    chinl = np.zeros(S)
    bigc = np.zeros(S, np.int64)

    if rule_code == ER:
        ell = 2
    elif rule_code == ADJACENT:
        ell = 3
    else:
        ell = 4
    v = np.zeros(4, np.int64)
    c = np.zeros(4, np.int64)
    r = np.zeros(4, np.int64)
    s = state0
    si = 0
    for m in range(steps_total + 1):
        while si < S and snap_steps[si] == m:
            acc = 0.0
            kmax = K_report if K_report < n else n
            for k in range(1, kmax + 1):
                f = count[k] * k / n
                nk[si, k - 1] = f
                acc += f
            tail[si] = 1.0 - acc
            l1f[si] = l1 / n
            chi[si] = sum_k2 / n
            chinl[si] = 0.0 if l1 == n else (sum_k2 - l1 * l1) / n
            bigc[si] = big
            si += 1
        if m == steps_total:
            break
        while True:
            for j in range(ell):
                s = s + GOLD
                v[j] = int64(mix64(s) % uint64(n))
            if not distinct:
                break
            ok = True
            for a in range(ell):
                for b in range(a + 1, ell):
                    if v[a] == v[b]:
                        ok = False
            if ok:
                break
        for j in range(ell):
            rj = _find(parent, v[j])
            r[j] = rj
            c[j] = size[rj]
        if rule_code == ER:
            ra, rb = r[0], r[1]
        elif rule_code == PRODUCT:
            if c[0] * c[1] <= c[2] * c[3]:
                ra, rb = r[0], r[1]
            else:
                ra, rb = r[2], r[3]
        elif rule_code == SUM:
            if c[0] + c[1] <= c[2] + c[3]:
                ra, rb = r[0], r[1]
            else:
                ra, rb = r[2], r[3]
        elif rule_code == BOUNDED:
            nclass = B + 1
            idx = 0
            for j in range(4):
                cap = c[j] if c[j] <= B else B + 1
                idx = idx * nclass + (cap - 1)
            if table[idx] == 1:
                ra, rb = r[0], r[1]
            else:
                ra, rb = r[2], r[3]
        elif rule_code == DCDGM:
            ra = r[0] if c[0] <= c[1] else r[1]
            rb = r[2] if c[2] <= c[3] else r[3]
        else:  # ADJACENT
            if c[1] <= c[2]:
                ra, rb = r[0], r[1]
            else:
                ra, rb = r[0], r[2]
        if ra != rb:
            a = size[ra]
            b = size[rb]
            if a < b:
                ra, rb = rb, ra
                a, b = b, a
            parent[rb] = ra
            size[ra] = a + b
            count[a] -= 1
            count[b] -= 1
            count[a + b] += 1
            sum_k2 += 2 * a * b
            if a + b > l1:
                l1 = a + b
            d = np.int64(0)
            if a + b >= eta_thresh:
                d += 1
            if a >= eta_thresh:
                d -= 1
            if b >= eta_thresh:
                d -= 1
            big += d
    return nk, tail, l1f, chi, chinl, bigc, count


@njit(cache=True)
def er_conditional_drift(count, n, k):
    """Exact pre-draw expectation of the one-step change of N_k for the
    always-first-pair rule, from the current component census."""
    conv = 0.0
    for a in range(1, k):
        conv += (a * count[a]) * ((k - a) * count[k - a])
    if k % 2 == 0:
        h = k // 2
        conv -= h * (h * count[h])
    return (k * conv - 2.0 * k * (k * count[k]) * (n - k)) / (n * n)


@njit(cache=True)
def run_er_drift(n, steps_total, state0, ks):
    """Run the always-first-pair rule recording per-step martingale increments.

    Y[m, i] = realized change of N_{ks[i]} at step m+1 minus its exact
    conditional expectation given the census before the step.
    """
    parent = np.empty(n, np.int64)
    for i in range(n):
        parent[i] = i
    size = np.ones(n, np.int64)
    count = np.zeros(n + 1, np.int64)
    count[1] = n
    nk_ = ks.shape[0]
    Y = np.zeros((steps_total, nk_))
    s = state0
    for m in range(steps_total):
        for i in range(nk_):
            Y[m, i] = -er_conditional_drift(count, n, ks[i])
        s = s + GOLD
        v0 = int64(mix64(s) % uint64(n))
        s = s + GOLD
        v1 = int64(mix64(s) % uint64(n))
        r0 = _find(parent, v0)
        r1 = _find(parent, v1)
        if r0 != r1:
            a = size[r0]
            b = size[r1]
            if a < b:
                r0, r1 = r1, r0
                a, b = b, a
            parent[r1] = r0
            size[r0] = a + b
            count[a] -= 1
            count[b] -= 1
            count[a + b] += 1
            for i in range(nk_):
                k = ks[i]
                d = 0
                if a == k:
                    d -= k
                if b == k:
                    d -= k
                if a + b == k:
                    d += k
                Y[m, i] += d
    return Y, count
