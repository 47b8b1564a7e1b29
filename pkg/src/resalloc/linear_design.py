"""Precision allocation for estimation from general linear measurements.

Measurements ``y = X theta + eps`` with ``eps ~ N(0, P^{-1})`` and diagonal
precision ``P(r)`` built from an allocation ``r``. The weighted least-squares
estimator ``(X^T P X)^{-1} X^T P y`` is unbiased with covariance
``M^{-1} = (X^T P X)^{-1}``. Two design criteria are supported:

* ``trace_inverse``: ``Tr(M^{-1})``, the mean squared error;
* ``tail_bound``: ``||M^{-1}||_F + lam * ||M^{-1}||_op`` with
  ``lam = sqrt(log(1/delta))``, which controls the high-probability radius
  ``2 ||M^{-1}||_F sqrt(t) + 2 ||M^{-1}||_op t`` at ``t = log(1/delta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import DerivativeSingularityError, DomainError, RankDeficiencyError, ShapeMismatchError
from .solver_core import DEFAULT_MAX_ITER, DEFAULT_TOL, SimplexConstraint, SolverReport, minimize_projected
from .sources import SourceModel
from .tradeoffs import TradeoffFunction

OBJECTIVES = ("trace_inverse", "tail_bound")
TIE_RTOL = 1e-8


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: np.ndarray
    covariance: np.ndarray

    @property
    def mse_predicted(self) -> float:
        return float(np.trace(self.covariance))


@dataclass(frozen=True)
class DesignProblem:
    """``precision_map[k] = (i, f)``: row ``k`` of ``X`` has precision ``f(r_i)``."""

    X: np.ndarray
    precision_map: tuple[tuple[int, TradeoffFunction], ...]
    constraint: SimplexConstraint
    objective_kind: str = "trace_inverse"
    confidence_weight: float = 0.0
    n_sources: int | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        object.__setattr__(self, "X", X)
        pm = tuple((int(i), f) for i, f in self.precision_map)
        object.__setattr__(self, "precision_map", pm)
        if len(pm) != X.shape[0]:
            raise ShapeMismatchError(f"precision map has {len(pm)} rows, X has {X.shape[0]}")
        if self.objective_kind not in OBJECTIVES:
            raise ValueError(f"objective_kind must be one of {OBJECTIVES}")
        if self.confidence_weight < 0:
            raise DomainError("confidence_weight must be non-negative")
        n = max(i for i, _ in pm) + 1
        if self.n_sources is None:
            object.__setattr__(self, "n_sources", n)
        elif self.n_sources < n:
            raise ShapeMismatchError(f"precision map refers to source {n - 1} but n_sources={self.n_sources}")
        check_rank(X)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def precisions(self, r: Sequence[float]) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.shape != (self.n_sources,):
            raise ShapeMismatchError(f"allocation has shape {r.shape}, expected ({self.n_sources},)")
        return np.array([f.precision(r[i]) for i, f in self.precision_map])

    def with_objective(self, kind: str, confidence_weight: float | None = None) -> "DesignProblem":
        cw = self.confidence_weight if confidence_weight is None else confidence_weight
        return DesignProblem(self.X, self.precision_map, self.constraint, kind, cw, self.n_sources)


def check_rank(X: np.ndarray) -> None:
    if X.shape[0] < X.shape[1]:
        raise RankDeficiencyError(f"X has {X.shape[0]} rows for {X.shape[1]} unknowns")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficiencyError(f"X is rank deficient (singular values {sv[0]:.3g} .. {sv[-1]:.3g})")


def confidence_weight(delta: float) -> float:
    """``sqrt(log(1/delta))``, the operator-norm weight for confidence ``1 - delta``."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(math.log(1.0 / delta))


def block_design(sources: Sequence[SourceModel], d: int, constraint: SimplexConstraint, **kw) -> DesignProblem:
    """Design with one unit row ``e_j`` per (source, observed coordinate) pair.

    ``Tr(M^{-1})`` then equals the heterogeneous-support objective.
    """
    rows, pm = [], []
    for i, s in enumerate(sources):
        for j, f in zip(s.support, s.tradeoffs):
            e = np.zeros(d)
            e[j] = 1.0
            rows.append(e)
            pm.append((i, f))
    return DesignProblem(np.array(rows), tuple(pm), constraint, n_sources=len(sources), **kw)


def _diag(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim == 2:
        if np.any(P - np.diag(np.diag(P))):
            raise DomainError("precision matrix must be diagonal")
        P = np.diag(P)
    return P


def mvue_estimate(X, P, y) -> EstimateResult:
    """Precision-weighted least squares ``(X^T P X)^{-1} X^T P y``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = _diag(P)
    y = np.asarray(y, dtype=float)
    if p.shape != (X.shape[0],) or y.shape[0] != X.shape[0]:
        raise ShapeMismatchError("X, P and y disagree in the number of measurements")
    if np.any(p <= 0):
        raise DomainError("precision entries must be positive")
    check_rank(X)
    M = X.T @ (p[:, None] * X)
    cf = linalg.cho_factor(M)
    theta = linalg.cho_solve(cf, X.T @ (p * y))
    cov = linalg.cho_solve(cf, np.eye(X.shape[1]))
    return EstimateResult(theta, 0.5 * (cov + cov.T))


def _inverse_info(X: np.ndarray, p: np.ndarray) -> np.ndarray | None:
    M = X.T @ (p[:, None] * X)
    try:
        cf = linalg.cho_factor(M)
    except linalg.LinAlgError:
        return None
    A = linalg.cho_solve(cf, np.eye(X.shape[1]))
    return 0.5 * (A + A.T)


def objective_from_precisions(X: np.ndarray, p: np.ndarray, kind: str, lam: float = 0.0) -> float:
    A = _inverse_info(X, p)
    if A is None:
        return math.inf
    if kind == "trace_inverse":
        return float(np.trace(A))
    return float(np.linalg.norm(A, "fro") + lam * np.linalg.eigvalsh(A)[-1])


def design_objective(p: DesignProblem, r: Sequence[float]) -> float:
    """Design criterion at ``r``; infinite when ``X^T P X`` is singular."""
    return objective_from_precisions(p.X, p.precisions(r), p.objective_kind, p.confidence_weight)


def _gradient_wrt_precisions(X: np.ndarray, A: np.ndarray, kind: str, lam: float) -> tuple[np.ndarray, bool]:
    B = X @ A  # row k is (A x_k)^T
    if kind == "trace_inverse":
        return -np.einsum("kd,kd->k", B, B), False
    fro = np.linalg.norm(A, "fro")
    g = -np.einsum("kd,de,ke->k", B, A, B) / fro
    if lam == 0.0:
        return g, False
    w, V = np.linalg.eigh(A)
    top = w[-1]
    nonsmooth = A.shape[0] > 1 and (top - w[-2]) <= TIE_RTOL * abs(top)
    v = V[:, -1]
    # d lambda_max(A) = -(v^T dM v) * lambda_max(A)^2
    g = g - lam * top**2 * (X @ v) ** 2
    return g, bool(nonsmooth)


def _value_grad(p: DesignProblem, r: np.ndarray, strict: bool):
    prec = p.precisions(r)
    if strict and np.any(prec <= 0):
        raise DomainError("design gradient needs every mapped precision to be positive")
    A = _inverse_info(p.X, prec)
    if A is None:
        if strict:
            raise DomainError("X^T P X is singular at r")
        return math.inf, np.full(p.n_sources, np.nan), False
    gp, nonsmooth = _gradient_wrt_precisions(p.X, A, p.objective_kind, p.confidence_weight)
    grad = np.zeros(p.n_sources)
    for k, (i, f) in enumerate(p.precision_map):
        try:
            grad[i] += gp[k] * f.precision_derivative(r[i])
        except DerivativeSingularityError:
            if strict:
                raise
            grad[i] = -math.inf
    if p.objective_kind == "trace_inverse":
        val = float(np.trace(A))
    else:
        val = float(np.linalg.norm(A, "fro") + p.confidence_weight * np.linalg.eigvalsh(A)[-1])
    return val, grad, nonsmooth


def design_gradient(p: DesignProblem, r: Sequence[float], return_flag: bool = False):
    """Gradient of the design criterion in ``r`` (a subgradient for ``tail_bound``).

    With ``return_flag=True`` also returns whether the two largest eigenvalues
    of ``M^{-1}`` are tied within 1e-8 relative, where the operator norm is
    not differentiable.
    """
    _, grad, flag = _value_grad(p, np.asarray(r, dtype=float), strict=True)
    return (grad, flag) if return_flag else grad


def solve_design(p: DesignProblem, *, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SolverReport:
    start = p.constraint.interior_point(p.n_sources)
    rep = minimize_projected(lambda r: _value_grad(p, r, strict=False), start, p.constraint, tol=tol, max_iter=max_iter)
    rep.details.update(sense="minimize", method="projected_gradient", objective_kind=p.objective_kind)
    return rep


def tail_bound_radius(p: DesignProblem, r: Sequence[float], delta: float) -> float:
    """Radius ``rho`` with ``P[||theta_hat - theta||^2 > rho] <= delta``."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    A = _inverse_info(p.X, p.precisions(r))
    if A is None:
        return math.inf
    return radius_from_covariance(A, delta)


def radius_from_covariance(A: np.ndarray, delta: float) -> float:
    t = math.log(1.0 / delta)
    return 2.0 * np.linalg.norm(A, "fro") * math.sqrt(t) + 2.0 * np.linalg.eigvalsh(A)[-1] * t
