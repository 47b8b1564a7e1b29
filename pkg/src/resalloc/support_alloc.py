"""Allocation when sources observe different subsets of the coordinates.

With optimal per-coordinate aggregation the total mean squared error is

    sum_j 1 / sum_{i in I_j} q_i^(j)(r_i)

where ``I_j`` is the reciprocal set of coordinate ``j``. This is convex in
``r`` for concave non-decreasing positive precisions and is minimized here
by projected gradient over the budget constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DerivativeSingularityError, DomainError
from .solver_core import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    SimplexConstraint,
    SolverReport,
    minimize_projected,
)
from .sources import SourceModel, reciprocal_sets

__all__ = [
    "SourceModel",
    "SupportProblem",
    "reciprocal_sets",
    "support_objective",
    "support_gradient",
    "solve_support",
    "solve_total_independence_closed",
]


@dataclass(frozen=True)
class SupportProblem:
    d: int
    sources: tuple[SourceModel, ...]
    constraint: SimplexConstraint
    _sets: tuple[tuple[int, ...], ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "_sets", tuple(reciprocal_sets(self.sources, self.d)))

    @property
    def n(self) -> int:
        return len(self.sources)

    @property
    def reciprocal(self) -> tuple[tuple[int, ...], ...]:
        return self._sets


def _coordinate_precisions(p: SupportProblem, r: np.ndarray) -> np.ndarray:
    tot = np.zeros(p.d)
    for i, s in enumerate(p.sources):
        for j, f in zip(s.support, s.tradeoffs):
            tot[j] += f.precision(r[i])
    return tot


def support_objective(p: SupportProblem, r: Sequence[float]) -> float:
    """Total MSE of the optimally aggregated estimate at allocation ``r``."""
    r = np.asarray(r, dtype=float)
    tot = _coordinate_precisions(p, r)
    if np.any(tot <= 0.0):
        return math.inf
    return math.fsum(1.0 / tot)


def _value_and_grad(p: SupportProblem, r: np.ndarray) -> tuple[float, np.ndarray]:
    tot = _coordinate_precisions(p, r)
    if np.any(tot <= 0.0):
        return math.inf, np.full(p.n, np.nan)
    inv_sq = 1.0 / tot**2
    grad = np.zeros(p.n)
    for i, s in enumerate(p.sources):
        acc = 0.0
        for j, f in zip(s.support, s.tradeoffs):
            try:
                acc += f.precision_derivative(r[i]) * inv_sq[j]
            except DerivativeSingularityError:
                acc = math.inf
                break
        grad[i] = -acc
    return math.fsum(1.0 / tot), grad


def support_gradient(p: SupportProblem, r: Sequence[float]) -> np.ndarray:
    """Gradient of :func:`support_objective`; needs every coordinate to have positive precision."""
    r = np.asarray(r, dtype=float)
    val, grad = _value_and_grad(p, r)
    if not math.isfinite(val):
        raise DomainError("objective is infinite at r; some coordinate has zero precision")
    return grad


def solve_support(
    p: SupportProblem,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    x0: Sequence[float] | None = None,
) -> SolverReport:
    start = p.constraint.interior_point(p.n) if x0 is None else np.asarray(x0, dtype=float)
    rep = minimize_projected(lambda r: _value_and_grad(p, r), start, p.constraint, tol=tol, max_iter=max_iter)
    tot = _coordinate_precisions(p, rep.allocation)
    rep.details.update(
        sense="minimize",
        method="projected_gradient",
        per_coord_loss=1.0 / tot,
        reciprocal_sets=[list(m) for m in p.reciprocal],
    )
    return rep


def solve_total_independence_closed(sigma: Sequence[float], R: float) -> np.ndarray:
    """Minimizer of ``sum_i sigma_i^2 / r_i`` over ``R`` times the simplex: ``r_i ∝ sigma_i``.

    ``sigma`` holds standard deviations, not variances.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise DomainError("sigma must be positive")
    return R * sigma / sigma.sum()
