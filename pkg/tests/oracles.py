"""Independent reference computations used as test oracles.

Nothing here calls the package under test: brute-force enumeration, dense
grid searches and central finite differences.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def simplex_grid(n: int, step: float, total: float = 1.0) -> np.ndarray:
    """All points of ``total`` times the probability simplex with spacing ``step * total``.

    Only points with ``sum == total`` (every catalog loss strictly decreases,
    so optima use the whole budget).
    """
    m = int(round(1.0 / step))
    if n == 1:
        return np.array([[total]])
    if n == 2:
        k = np.arange(m + 1)
        return np.stack([k, m - k], axis=1) * (total / m)
    if n == 3:
        i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        mask = i + j <= m
        i, j = i[mask], j[mask]
        return np.stack([i, j, m - i - j], axis=1) * (total / m)
    pts = [c for c in itertools.product(range(m + 1), repeat=n - 1) if sum(c) <= m]
    arr = np.array([list(c) + [m - sum(c)] for c in pts], dtype=float)
    return arr * (total / m)


def grid_argmin(fun, n: int, step: float, total: float = 1.0) -> tuple[np.ndarray, float]:
    """Minimizer of a vectorized ``fun(points) -> values`` over :func:`simplex_grid`."""
    pts = simplex_grid(n, step, total)
    vals = fun(pts)
    k = int(np.nanargmin(vals))
    return pts[k], float(vals[k])


def brute_force_assignment(q: np.ndarray, sense: str = "maximize") -> tuple[tuple[int, ...], float]:
    n = q.shape[0]
    best_perm, best = None, None
    for perm in itertools.permutations(range(n)):
        val = math.fsum(q[i, perm[i]] for i in range(n))
        if best is None or (val > best if sense == "maximize" else val < best):
            best_perm, best = perm, val
    return best_perm, best


def central_diff(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences with step ``h * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        hi = h * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = hi
        g[i] = (f(x + e) - f(x - e)) / (2 * hi)
    return g


def box_simplex_grid_projection(v, lower, upper, budget, step=1e-3):
    """Nearest point of a 2-D box-simplex set to ``v`` on a dense grid (2 coordinates only)."""
    xhi = min(upper[0], budget)
    xs = np.arange(lower[0], xhi + step, step)
    xs = np.append(xs[xs <= xhi], xhi)
    best, best_d = None, math.inf
    for x in xs:
        yhi = min(upper[1], budget - x)
        ys = np.arange(lower[1], yhi + step, step)
        ys = np.append(ys[ys <= yhi], yhi) if yhi >= lower[1] else ys[:0]
        if ys.size == 0:
            continue
        d = (x - v[0]) ** 2 + (ys - v[1]) ** 2
        k = int(np.argmin(d))
        if d[k] < best_d:
            best, best_d = np.array([x, ys[k]]), d[k]
    return best
