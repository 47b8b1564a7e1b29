"""Bijective assignment of fixed resource amounts to sources.

With resource amounts ``r_1..r_N`` and benefit matrix ``Q[i, j] = q_i(r_j)``
the best assignment maximizes ``sum_i Q[i, tau(i)]`` over permutations. Its
LP relaxation over doubly stochastic matrices has a permutation-matrix
optimum, so the Hungarian algorithm solves it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import DomainError, ShapeMismatchError
from .tradeoffs import TradeoffFunction

# lexicographic tie-breaking costs O(N^2) extra solves; skipped above this size
LEX_LIMIT = 50


@dataclass(frozen=True)
class AssignmentProblem:
    q_matrix: np.ndarray
    sense: str = "maximize"

    def __post_init__(self):
        q = np.asarray(self.q_matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ShapeMismatchError(f"benefit matrix must be square, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise DomainError("benefit matrix entries must be finite")
        if self.sense not in ("maximize", "minimize"):
            raise ValueError(f"sense must be 'maximize' or 'minimize', got {self.sense!r}")
        object.__setattr__(self, "q_matrix", q)

    @classmethod
    def from_tradeoffs(
        cls,
        fs: Sequence[TradeoffFunction],
        resources: Sequence[float],
        sense: str = "maximize",
        quantity: str = "precision",
    ) -> "AssignmentProblem":
        """Build ``Q[i, j] = q_i(r_j)`` (or ``l_i(r_j)`` with ``quantity='loss'``)."""
        if len(fs) != len(resources):
            raise ShapeMismatchError("need as many resource amounts as sources")
        ev = (lambda f, r: f.precision(r)) if quantity == "precision" else (lambda f, r: f.loss(r))
        q = np.array([[ev(f, r) for r in resources] for f in fs])
        return cls(q, sense)


@dataclass(frozen=True)
class AssignmentResult:
    permutation: np.ndarray  # permutation[i] = resource index given to source i
    objective: float


def assignment_value(q: np.ndarray, perm: Sequence[int]) -> float:
    return math.fsum(q[i, j] for i, j in enumerate(perm))


def _best(cost: np.ndarray) -> np.ndarray:
    return kernels.hungarian_min(cost)


def _lex_refine(cost: np.ndarray, best: float) -> np.ndarray:
    """Lexicographically smallest permutation attaining the optimal cost ``best``."""
    n = cost.shape[0]
    tol = 1e-12 * (1.0 + float(np.abs(cost).sum()))
    rows = list(range(n))
    cols = list(range(n))
    fixed = 0.0
    perm = np.empty(n, dtype=np.intp)
    for i in range(n):
        rest_rows = rows[1:]
        for j in cols:
            rest_cols = [c for c in cols if c != j]
            if rest_rows:
                sub = cost[np.ix_(rest_rows, rest_cols)]
                sub_perm = _best(sub)
                sub_val = math.fsum(sub[k, sub_perm[k]] for k in range(len(rest_rows)))
            else:
                sub_val = 0.0
            if fixed + cost[i, j] + sub_val <= best + tol:
                perm[i] = j
                fixed += cost[i, j]
                cols = rest_cols
                break
        rows = rest_rows
    return perm


def solve_assignment(p: AssignmentProblem, tie_break: str = "lex") -> AssignmentResult:
    """Optimal permutation via the Hungarian algorithm.

    With ``tie_break='lex'`` (and ``N <= LEX_LIMIT``) the lexicographically
    smallest optimal permutation is returned.
    """
    q = p.q_matrix
    cost = -q if p.sense == "maximize" else q
    perm = _best(cost)
    best = assignment_value(cost, perm)
    if tie_break == "lex" and q.shape[0] <= LEX_LIMIT:
        cand = _lex_refine(cost, best)
        if assignment_value(cost, cand) <= best:
            perm = cand
    return AssignmentResult(np.asarray(perm, dtype=np.intp), assignment_value(q, perm))


def solve_rank_one_sorted(
    r: Sequence[float],
    sigma_sq: Sequence[float],
    sense: str = "maximize",
    phi: Callable[[np.ndarray], np.ndarray] | None = None,
) -> AssignmentResult:
    """Closed-form assignment when the benefit is ``phi(r_j) / sigma_i^2``.

    ``maximize`` pairs the largest resources with the smallest variances
    (sum of precisions, shared support). ``minimize`` handles the sum of
    losses ``sigma_i^2 / phi(r_j)`` (disjoint supports) and pairs the largest
    resources with the largest variances.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(sigma_sq, dtype=float)
    if r.shape != s.shape or r.ndim != 1:
        raise ShapeMismatchError("r and sigma_sq must be vectors of equal length")
    vals = r if phi is None else np.asarray(phi(r), dtype=float)
    res_order = np.argsort(-vals, kind="stable")
    if sense == "maximize":
        src_order = np.argsort(s, kind="stable")
    elif sense == "minimize":
        if np.any(vals <= 0):
            raise DomainError("resource values must be positive when minimizing a sum of losses")
        src_order = np.argsort(-s, kind="stable")
    else:
        raise ValueError(f"sense must be 'maximize' or 'minimize', got {sense!r}")
    perm = np.empty(r.size, dtype=np.intp)
    perm[src_order] = res_order
    if sense == "maximize":
        obj = math.fsum(vals[perm[i]] / s[i] for i in range(r.size))
    else:
        obj = math.fsum(s[i] / vals[perm[i]] for i in range(r.size))
    return AssignmentResult(perm, obj)
