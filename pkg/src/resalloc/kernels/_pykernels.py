"""Pure-Python/numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``RESALLOC_PURE_PYTHON=1`` is set. Signatures match ``_ckernels``.
"""

import numpy as np


def project_simplex_sorted(v, budget):
    """Project ``v`` onto ``{x >= 0, sum(x) <= budget}`` by sort-and-threshold."""
    v = np.asarray(v, dtype=float)
    x = np.maximum(v, 0.0)
    if x.sum() <= budget:
        return x
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - budget
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - cssv / ind > 0)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_box_simplex(v, lower, upper, budget):
    """Project ``v`` onto ``{lower <= x <= upper, sum(x) <= budget}``.

    The shift ``tau`` solving ``sum(clip(v - tau, lower, upper)) = budget`` is
    located among the breakpoints of the piecewise-linear left-hand side and
    then obtained by exact linear interpolation.
    """
    v = np.asarray(v, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(v, lower, upper)
    if x.sum() <= budget:
        return x
    bps = np.concatenate([v - upper, v - lower])
    bps = bps[np.isfinite(bps) & (bps > 0.0)]
    taus = np.unique(np.concatenate([[0.0], bps]))
    g = np.clip(v[None, :] - taus[:, None], lower, upper).sum(axis=1)
    below = np.nonzero(g <= budget)[0]
    if below.size == 0:
        # sum(lower) == budget up to rounding
        return lower.copy()
    k = below[0]
    t0, t1 = taus[k - 1], taus[k]
    g0, g1 = g[k - 1], g[k]
    tau = t1 if g0 == g1 else t0 + (g0 - budget) * (t1 - t0) / (g0 - g1)
    return np.clip(v - tau, lower, upper)


def hungarian_min(cost):
    """Minimum-cost perfect matching on a square matrix.

    Shortest augmenting path with row/column potentials, O(n^3).
    Returns ``assignment`` with ``assignment[i]`` the column matched to row ``i``.
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    c = cost.tolist()
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = c[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = np.empty(n, dtype=np.intp)
    for j in range(1, n + 1):
        assignment[p[j] - 1] = j - 1
    return assignment
