"""Polling allocation for deciding on which side of a hyperplane a parameter lies.

The analyst must decide whether ``<theta, c> > b`` from independent per-region
estimates. Regions are weighted by ``c`` (normalized to sum to one) and the
true aggregate is ``b + t`` for an advantage ``t > 0``.

*Direct* mode: region ``i`` returns an unbiased estimate with variance
``v_i(r_i)``. Bernstein's inequality bounds the error probability by

    exp(-(t^2 / 2) / (V + t ||c||_inf / 3)),   V = sum_i c_i^2 v_i(r_i)

so the best allocation minimizes ``V`` whatever the value of ``t``.

*Indirect* mode: region ``i`` returns a bit that is wrong with probability
``l_i(r_i) = exp(-r_i eta_i^2 / 2) / 2``. The polling bias is at most
``beta(r) = sum_i c_i l_i(r_i)`` and the variance proxy is
``gamma(r) = sum_i c_i^2 l_i(r_i)``. For ``beta(r) < t`` the error probability
is at most

    exp(-((t - beta)^2 / 2) / (gamma + ||c||_inf (t - beta) / 3))

and minimizing it amounts to minimizing
``2 gamma / (t - beta)^2 + (2/3) ||c||_inf / (t - beta)``, the reciprocal of
the exponent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import DerivativeSingularityError, DomainError, ShapeMismatchError
from .solver_core import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    SimplexConstraint,
    SolverReport,
    minimize_projected,
)
from .tradeoffs import TradeoffFunction, exp_margin_loss

BIAS_SLACK = 1e-9
# coefficient of ||c||_inf / (t - beta) in the minimized quantity; 2/3 makes it
# exactly the reciprocal of the Bernstein exponent
BERNSTEIN_LINEAR_COEF = 2.0 / 3.0


@dataclass(frozen=True)
class ElectionProblem:
    c: np.ndarray
    t: float
    constraint: SimplexConstraint
    mode: str = "indirect"
    b: float = 0.5
    variance_fns: tuple[TradeoffFunction, ...] | None = None
    margins: np.ndarray | None = None
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ShapeMismatchError("weights must be a nonempty vector")
        if np.any(c < 0):
            raise DomainError("weights must be non-negative")
        if abs(c.sum() - 1.0) > 1e-9:
            raise DomainError(f"weights must sum to 1 (got {c.sum()}); use normalize_weights")
        object.__setattr__(self, "c", c)
        if not self.t > 0:
            raise DomainError(f"advantage t must be positive, got {self.t}")
        if self.mode == "direct":
            if self.variance_fns is None or len(self.variance_fns) != c.size:
                raise ShapeMismatchError("direct mode needs one variance function per region")
            object.__setattr__(self, "variance_fns", tuple(self.variance_fns))
        elif self.mode == "indirect":
            if self.margins is None:
                raise ShapeMismatchError("indirect mode needs margin lower bounds")
            m = np.asarray(self.margins, dtype=float)
            if m.shape != c.shape:
                raise ShapeMismatchError("one margin per region is needed")
            if np.any(m <= 0) or np.any(m > 0.5):
                raise DomainError("margins must lie in (0, 1/2]")
            object.__setattr__(self, "margins", m)
        else:
            raise ValueError(f"mode must be 'direct' or 'indirect', got {self.mode!r}")
        if self.names is not None:
            if len(self.names) != c.size:
                raise ShapeMismatchError("one name per region is needed")
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def d(self) -> int:
        return self.c.size

    @property
    def losses(self) -> tuple[TradeoffFunction, ...]:
        if self.mode == "direct":
            return self.variance_fns
        return tuple(exp_margin_loss(e) for e in self.margins)

    def with_budget(self, budget: float) -> "ElectionProblem":
        return replace(self, constraint=SimplexConstraint(budget, self.constraint.lower, self.constraint.upper))


@dataclass
class BoundReport:
    allocation: np.ndarray
    bound_value: float
    variance_term: float
    feasible: bool
    bias: float | None = None
    objective: float = math.nan
    solver: SolverReport | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.solver is None or self.solver.converged

    def to_dict(self) -> dict[str, Any]:
        out = {
            "allocation": [float(x) for x in self.allocation],
            "bound_value": float(self.bound_value),
            "variance_term": float(self.variance_term),
            "feasible": bool(self.feasible),
            "bias": None if self.bias is None else float(self.bias),
            "objective": float(self.objective) if math.isfinite(self.objective) else None,
            "converged": self.converged,
        }
        if self.solver is not None:
            out["iterations"] = int(self.solver.iterations)
            out["kkt_residual"] = float(self.solver.kkt_residual)
        out.update(self.details)
        return out


def normalize_weights(c: Sequence[float]) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    total = c.sum()
    if not total > 0:
        raise DomainError("weights must have a positive sum")
    return c / total


def read_regions_csv(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Read ``region,weight,margin`` rows (header required, UTF-8). Weights are normalized."""
    names, w, m = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"region", "weight", "margin"} - set(reader.fieldnames or ())
        if missing:
            raise ShapeMismatchError(f"{path}: missing CSV columns {sorted(missing)}")
        for row in reader:
            names.append(row["region"])
            w.append(float(row["weight"]))
            m.append(float(row["margin"]))
    return names, normalize_weights(w), np.asarray(m)


# -- shared pieces --------------------------------------------------------


def _losses_and_slopes(fs: Sequence[TradeoffFunction], r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ell = np.empty(len(fs))
    slope = np.empty(len(fs))
    for i, (f, x) in enumerate(zip(fs, r)):
        ell[i] = f.loss(x)
        try:
            slope[i] = f.loss_derivative(x)
        except DerivativeSingularityError:
            slope[i] = -math.inf
    return ell, slope


def _weighted(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    # zero weight times infinite loss contributes nothing
    return np.where(w > 0, w * np.where(w > 0, v, 0.0), 0.0)


def bernstein_bound(t: float, variance: float, c_inf: float) -> float:
    if not t > 0:
        raise DomainError(f"advantage must be positive, got {t}")
    return math.exp(-(t * t / 2.0) / (variance + t * c_inf / 3.0))


# -- direct elections -----------------------------------------------------


def variance_sum(p: ElectionProblem, r: Sequence[float]) -> float:
    ell, _ = _losses_and_slopes(p.losses, np.asarray(r, dtype=float))
    return math.fsum(_weighted(p.c**2, ell))


def direct_bound(p: ElectionProblem, r: Sequence[float], t: float | None = None) -> float:
    """Bernstein bound on the error probability of the direct-election decision rule."""
    t = p.t if t is None else t
    return bernstein_bound(t, variance_sum(p, r), float(p.c.max()))


def solve_direct(p: ElectionProblem, *, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> BoundReport:
    """Minimize ``sum_i c_i^2 v_i(r_i)``; the minimizer does not depend on ``t``."""
    if p.mode != "direct":
        raise DomainError("solve_direct needs a direct-mode problem")
    c2 = p.c**2
    fs = p.losses

    def fun(r):
        ell, slope = _losses_and_slopes(fs, r)
        return math.fsum(_weighted(c2, ell)), _weighted(c2, slope)

    rep = minimize_projected(fun, p.constraint.interior_point(p.d), p.constraint, tol=tol, max_iter=max_iter)
    V = rep.objective
    return BoundReport(
        rep.allocation,
        bernstein_bound(p.t, V, float(p.c.max())),
        V,
        True,
        objective=V,
        solver=rep,
    )


# -- indirect elections ---------------------------------------------------


def indirect_bias(p: ElectionProblem, r: Sequence[float]) -> float:
    """Upper bound ``sum_i c_i l_i(r_i)`` on the bias of the polled aggregate."""
    ell, _ = _losses_and_slopes(p.losses, np.asarray(r, dtype=float))
    return math.fsum(p.c * ell)


def indirect_variance(p: ElectionProblem, r: Sequence[float]) -> float:
    ell, _ = _losses_and_slopes(p.losses, np.asarray(r, dtype=float))
    return math.fsum(p.c**2 * ell)


def indirect_bound(p: ElectionProblem, r: Sequence[float], t: float | None = None) -> float:
    """Error-probability bound; 1.0 when the bias bound reaches the advantage."""
    t = p.t if t is None else t
    gap = t - indirect_bias(p, r)
    if gap <= 0:
        return 1.0
    return math.exp(-(gap * gap / 2.0) / (indirect_variance(p, r) + float(p.c.max()) * gap / 3.0))


def indirect_objective(
    p: ElectionProblem, r: Sequence[float], t: float | None = None, linear_coef: float = BERNSTEIN_LINEAR_COEF
) -> float:
    """``2 gamma/(t-beta)^2 + linear_coef * ||c||_inf/(t-beta)``; infinite when ``beta >= t``.

    With the default coefficient the bound equals ``exp(-1 / objective)``.
    """
    t = p.t if t is None else t
    gap = t - indirect_bias(p, r)
    if gap <= 0:
        return math.inf
    return 2.0 * indirect_variance(p, r) / gap**2 + linear_coef * float(p.c.max()) / gap


def minimize_bias(p: ElectionProblem, *, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SolverReport:
    fs = p.losses
    c = p.c

    def fun(r):
        ell, slope = _losses_and_slopes(fs, r)
        return math.fsum(c * ell), c * slope

    return minimize_projected(fun, p.constraint.interior_point(p.d), p.constraint, tol=tol, max_iter=max_iter)


def solve_indirect(
    p: ElectionProblem,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    linear_coef: float = BERNSTEIN_LINEAR_COEF,
) -> BoundReport:
    """Minimize the indirect-election error bound subject to ``beta(r) < t``.

    The smallest achievable bias is computed first; if it is not below ``t``
    the report is marked infeasible and carries the bias-minimizing allocation.
    """
    if p.mode != "indirect":
        raise DomainError("solve_indirect needs an indirect-mode problem")
    pre = minimize_bias(p, tol=tol, max_iter=max_iter)
    beta_min = pre.objective
    if beta_min >= p.t - BIAS_SLACK:
        return BoundReport(
            pre.allocation,
            1.0,
            indirect_variance(p, pre.allocation),
            False,
            bias=beta_min,
            solver=pre,
            details={"min_bias": beta_min},
        )

    fs, c, t = p.losses, p.c, p.t
    c_inf = float(c.max())

    def fun(r):
        ell, slope = _losses_and_slopes(fs, r)
        beta = math.fsum(c * ell)
        gap = t - beta
        if gap <= 0:
            return math.inf, np.full(r.size, np.nan)
        gamma = math.fsum(c * c * ell)
        val = 2.0 * gamma / gap**2 + linear_coef * c_inf / gap
        dbeta = c * slope
        dgamma = c * c * slope
        grad = 2.0 * dgamma / gap**2 + (4.0 * gamma / gap**3 + linear_coef * c_inf / gap**2) * dbeta
        return val, grad

    def admissible(r):
        return indirect_bias(p, r) < t - BIAS_SLACK

    start = p.constraint.interior_point(p.d)
    if not admissible(start):
        start = pre.allocation
    rep = minimize_projected(fun, start, p.constraint, tol=tol, max_iter=max_iter, admissible=admissible)
    r = rep.allocation
    beta = indirect_bias(p, r)
    gamma = indirect_variance(p, r)
    return BoundReport(
        r,
        indirect_bound(p, r),
        gamma,
        True,
        bias=beta,
        objective=rep.objective,
        solver=rep,
        details={"min_bias": beta_min},
    )


def regime_study(p: ElectionProblem, budgets: Sequence[float], **kw) -> list[BoundReport]:
    """Solve the indirect problem for each budget in ascending order."""
    budgets = list(budgets)
    if any(b1 < b0 for b0, b1 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be ascending")
    return [solve_indirect(p.with_budget(b), **kw) for b in budgets]
