"""Allocation of a divisible budget: projection, projected gradient, closed forms.

The generic path maximizes ``sum_i q_i(r_i)`` (or minimizes any smooth convex
function) over ``{lower <= r <= upper, sum(r) <= budget}`` by projected
gradient with Armijo backtracking. Closed forms cover linear precisions
(everything to the best source), power precisions (KKT formula) and
logarithmic channel precisions (water-filling).
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import kernels
from .errors import DerivativeSingularityError, DomainError, InfeasibleConstraintError
from .tradeoffs import LINEAR, LOG_CHANNEL, POWER, TradeoffFunction

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_REL_TOL = 1e-10
DEFAULT_WINDOW = 5
DEFAULT_MAX_ITER = 100_000
GRAD_CAP = 1e12
ARMIJO_C = 1e-4
NONSMOOTH_WINDOW = 500
NONSMOOTH_TOL = 1e-6
ROUNDOFF = 1e-14


@dataclass(frozen=True)
class SimplexConstraint:
    """``{r : lower <= r <= upper, sum(r) <= budget}``; bounds default to 0 and +inf."""

    budget: float
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (math.isfinite(self.budget) and self.budget > 0.0):
            raise InfeasibleConstraintError(f"budget must be positive and finite, got {self.budget}")
        if self.lower is not None:
            object.__setattr__(self, "lower", tuple(float(x) for x in self.lower))
            if any(x < 0.0 for x in self.lower):
                raise InfeasibleConstraintError("lower bounds must be non-negative")
            if math.fsum(self.lower) > self.budget * (1 + 1e-12):
                raise InfeasibleConstraintError(
                    f"lower bounds sum to {math.fsum(self.lower)} > budget {self.budget}"
                )
        if self.upper is not None:
            object.__setattr__(self, "upper", tuple(float(x) for x in self.upper))
        if self.lower is not None and self.upper is not None:
            if len(self.lower) != len(self.upper):
                raise InfeasibleConstraintError("lower and upper bounds differ in length")
            if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
                raise InfeasibleConstraintError("some lower bound exceeds its upper bound")

    def bounds(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        hi = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lo.size != n or hi.size != n:
            raise InfeasibleConstraintError(f"bounds have length {lo.size}/{hi.size}, expected {n}")
        return lo, hi

    def is_pure(self) -> bool:
        return (self.lower is None or not any(self.lower)) and (
            self.upper is None or all(math.isinf(u) for u in self.upper)
        )

    def project(self, v: np.ndarray) -> np.ndarray:
        return project_simplex(v, self)

    def interior_point(self, n: int) -> np.ndarray:
        """A point of the constraint set using the whole budget where the box allows."""
        lo, hi = self.bounds(n)
        if self.is_pure():
            return np.full(n, self.budget / n)
        return self.project(np.full(n, self.budget / n) + lo)

    def contains(self, r: np.ndarray, tol: float = 1e-9) -> bool:
        r = np.asarray(r, dtype=float)
        lo, hi = self.bounds(r.size)
        return bool(np.all(r >= lo - tol) and np.all(r <= hi + tol) and r.sum() <= self.budget + tol)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"budget": self.budget}
        if self.lower is not None:
            d["lower"] = list(self.lower)
        if self.upper is not None:
            d["upper"] = [u if math.isfinite(u) else None for u in self.upper]
        return d


@dataclass
class SolverReport:
    allocation: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "allocation": [float(x) for x in self.allocation],
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "kkt_residual": float(self.kkt_residual),
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def project_simplex(v: Sequence[float], c: SimplexConstraint) -> np.ndarray:
    """Euclidean projection of ``v`` onto the constraint set ``c``."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DomainError("cannot project a vector with non-finite entries")
    if c.is_pure():
        return kernels.project_simplex_sorted(v, c.budget)
    lo, hi = c.bounds(v.size)
    return kernels.project_box_simplex(v, lo, hi, c.budget)


def project_scaled(v: Sequence[float], w: Sequence[float], c: SimplexConstraint) -> np.ndarray:
    """Projection of ``v`` onto ``c`` in the metric ``sum_i (x_i - v_i)^2 / w_i``.

    The minimizer is ``clip(v - tau * w, lower, upper)`` with the smallest
    ``tau >= 0`` meeting the budget. ``tau`` is bracketed by binary search
    over the sorted breakpoints and then found by exact linear interpolation.
    With ``w = 1`` this is :func:`project_simplex`.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w)) and np.all(w > 0)):
        raise DomainError("scaled projection needs finite v and finite positive weights")
    lo, hi = c.bounds(v.size)
    x = np.clip(v, lo, hi)
    if x.sum() <= c.budget:
        return x
    with np.errstate(invalid="ignore"):
        bps = np.concatenate([(v - hi) / w, (v - lo) / w])
    taus = np.unique(np.concatenate([[0.0], bps[np.isfinite(bps) & (bps > 0.0)]]))

    def total(t):
        return float(np.clip(v - t * w, lo, hi).sum())

    a, b = 0, taus.size - 1
    if total(taus[b]) > c.budget:
        return lo.copy()  # sum(lower) == budget up to rounding
    while b - a > 1:
        m = (a + b) // 2
        if total(taus[m]) <= c.budget:
            b = m
        else:
            a = m
    t0, t1 = taus[a], taus[b]
    g0, g1 = total(t0), total(t1)
    tau = t1 if g0 == g1 else t0 + (g0 - c.budget) * (t1 - t0) / (g0 - g1)
    return np.clip(v - tau * w, lo, hi)


def minimize_projected(
    fun: Callable[[np.ndarray], tuple],
    x0: np.ndarray,
    constraint: SimplexConstraint,
    *,
    tol: float = DEFAULT_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
    window: int = DEFAULT_WINDOW,
    max_iter: int = DEFAULT_MAX_ITER,
    admissible: Callable[[np.ndarray], bool] | None = None,
    trial_step: str = "bb",
    nonsmooth_window: int = NONSMOOTH_WINDOW,
    nonsmooth_tol: float = NONSMOOTH_TOL,
    scaling: str = "none",
) -> SolverReport:
    """Projected gradient descent with Armijo backtracking.

    ``fun`` returns ``(value, gradient)`` or ``(value, gradient, nonsmooth)``.
    An infinite value or a point rejected by ``admissible`` makes the line
    search halve the step. So does a trial point with infinite gradient
    entries where the current point has finite ones: a slope that diverges
    at the boundary marks a face that cannot hold the minimizer, so iterates
    started in the interior never land on it. Such a trial is retried along
the segment towards the projected point, halving the fraction of the
segment taken (the Armijo rule along a feasible direction), so those
coordinates shrink geometrically instead. Infinite entries present at
    the start are capped at ``GRAD_CAP``, both for the step and in the
    stationarity residual; NaN entries are treated as zero.
    Trial steps start at the Barzilai-Borwein length (1.0 on the first
    iteration); ``trial_step="unit"`` restarts every line search from 1.0.
    A trial point whose objective matches the current one to within
    rounding (``ROUNDOFF`` relative) is also accepted when it lowers the
    stationarity residual.

    Convergence requires the relative objective change to stay below
    ``rel_tol`` for ``window`` consecutive iterations and the projected
    gradient norm to fall below ``tol``. The norm is taken in coordinates
    divided by the budget, ``||y - P(y - grad_y)||`` with ``y = x / budget``,
    so the tolerance does not depend on the units of the resource.

    ``scaling="diagonal"`` turns the smooth steps into scaled gradient
    projection: ``P_D(x - s D grad)`` with ``D = diag(1/h)``, ``h_i`` the
    secant curvature of coordinate ``i`` between successive iterates, and
    ``P_D`` the projection in the metric ``D^{-1}``
    (:func:`project_scaled`). Trial steps start at ``s = 1``. For separable
    objectives this is a diagonal quasi-Newton step and copes with
    coordinates whose curvatures differ by many orders of magnitude.
    Coordinates without a positive secant use the global one, or have
    their scale doubled when the step showed no curvature at all. The
    stationarity residual stays the unscaled one.

    When ``fun`` flags a point as non-smooth the iteration takes a normalized
    subgradient step of length ``budget / k`` instead. Once that has
    happened the best iterate is returned, and the run also counts as
    converged when the best value improved by less than ``nonsmooth_tol``
    over the last ``nonsmooth_window`` iterations.
    """

    def call(x):
        out = fun(x)
        return (out[0], out[1], bool(out[2])) if len(out) == 3 else (out[0], out[1], False)

    def capped(grad):
        gc = np.where(np.isnan(grad), 0.0, grad)
        return np.clip(gc, -GRAD_CAP, GRAD_CAP)

    scale = constraint.budget

    def residual(x, grad):
        # measured in budget-normalized coordinates x / budget; an infinite
        # slope at the boundary counts at the cap, so such a point is never
        # mistaken for a stationary one
        pg = x - constraint.project(x - scale**2 * capped(grad))
        return float(np.linalg.norm(pg)) / scale

    def new_singularity(gx, g_ref):
        return bool(np.any(np.isinf(gx) & np.isfinite(g_ref)))

    def ok(x, fx, gx, g_ref):
        if not math.isfinite(fx) or (admissible is not None and not admissible(x)):
            return False
        return not new_singularity(gx, g_ref)

    def along_segment(x, f, d):
        # Armijo backtracking on x + tau * d, tau = 1/2, 1/4, ...; coordinates
        # heading for a singular face shrink geometrically but stay positive
        tau = 0.5
        while tau >= 1e-30:
            xt = x + tau * d
            ft, gt, flagt = call(xt)
            if ok(xt, ft, gt, g) and ft <= f + ARMIJO_C * tau * float(gc @ d):
                return xt, ft, gt, flagt
            tau *= 0.5
        return None

    if scaling not in ("none", "diagonal"):
        raise ValueError(f"scaling must be 'none' or 'diagonal', got {scaling!r}")
    x = constraint.project(np.asarray(x0, dtype=float))
    D = np.ones(x.size) if scaling == "diagonal" else None

    def smooth_trial(s):
        if D is None:
            return constraint.project(x - s * gc)
        return project_scaled(x - s * D * gc, D, constraint)

    f, g, flag = call(x)
    if not math.isfinite(f):
        raise DomainError("objective is not finite at the starting point")
    if admissible is not None and not admissible(x):
        raise DomainError("starting point is not admissible")

    gc = capped(g)
    res = residual(x, g)
    small = 0
    step = 1.0
    it = 0
    converged = False
    nonsmooth_steps = 0
    best_x, best_f, best_res = x, f, res
    best_trace: deque[float] = deque(maxlen=nonsmooth_window + 1)
    for it in range(1, max_iter + 1):
        if flag:
            nonsmooth_steps += 1
            gn = float(np.linalg.norm(gc))
            if gn == 0.0:
                converged = True
                break
            s = constraint.budget / (nonsmooth_steps * gn)
            while True:
                xt = constraint.project(x - s * gc)
                ft, gt, flagt = call(xt)
                if ok(xt, ft, gt, g):
                    break
                s *= 0.5
                if s < 1e-30:
                    xt = None
                    break
            if xt is None:
                break
            d = xt - x
            step = 1.0
        else:
            s = step if D is None else 1.0
            retried = False
            while True:
                xt = smooth_trial(s)
                d = xt - x
                if not np.any(d):
                    # no movement: stationary, or a trial step lost to rounding
                    if res > tol and s < 1.0 and not retried:
                        s, retried = 1.0, True
                        continue
                    break
                ft, gt, flagt = call(xt)
                if ok(xt, ft, gt, g):
                    if ft <= f + ARMIJO_C * float(gc @ d):
                        break
                    # objective differences lost to rounding: accept if stationarity improves
                    if ft - f <= ROUNDOFF * abs(f) and residual(xt, gt) < res:
                        break
                elif math.isfinite(ft) and (admissible is None or admissible(xt)) and new_singularity(gt, g):
                    seg = along_segment(x, f, d)
                    if seg is not None:
                        xt, ft, gt, flagt = seg
                        d = xt - x
                        break
                s *= 0.5
                if s < 1e-30:
                    d = None
                    break
            if d is None:
                log.debug("line search stalled at iteration %d (residual %.3e)", it, res)
                converged = res <= tol
                break
            if not np.any(d):
                converged = res <= tol
                break
            gt_c = capped(gt)
            dg = gt_c - gc
            sy = float(d @ dg)
            if trial_step == "bb":
                step = float(d @ d) / sy if sy > 0 else 1.0
                step = min(max(step, 1e-20), 1e20)
            if D is not None:
                D = _secant_scaling(D, d, dg, x, sy)
        change = abs(ft - f) / max(1.0, abs(f))
        x, f, g, flag = xt, ft, gt, flagt
        gc = capped(g)
        res = residual(x, g)
        if f < best_f:
            best_x, best_f, best_res = x, f, res
        small = small + 1 if change < rel_tol else 0
        if small >= window and res <= tol:
            converged = True
            break
        if nonsmooth_steps:
            best_trace.append(best_f)
            if len(best_trace) > nonsmooth_window and best_trace[0] - best_f < nonsmooth_tol:
                converged = True
                break
    if nonsmooth_steps:
        rep = SolverReport(best_x, best_f, it, converged, best_res)
        rep.details["nonsmooth_steps"] = nonsmooth_steps
        return rep
    return SolverReport(x, f, it, converged, res)


def _secant_scaling(D: np.ndarray, d: np.ndarray, dg: np.ndarray, x: np.ndarray, sy: float) -> np.ndarray:
    """Update the inverse diagonal curvatures from the last step ``d`` and gradient change ``dg``."""
    h = 1.0 / D
    moved = np.abs(d) > 1e-10 * np.maximum(np.abs(x), np.abs(x + d))
    with np.errstate(divide="ignore", invalid="ignore"):
        sec = np.where(moved, dg / np.where(moved, d, 1.0), np.nan)
    good = moved & np.isfinite(sec) & (sec > 0)
    h[good] = sec[good]
    dd = float(d @ d)
    if sy > 0 and dd > 0:
        h[moved & ~good] = sy / dd
    else:
        # no curvature seen along the step (locally linear): lengthen it
        h[moved & ~good] *= 0.5
    return 1.0 / np.clip(h, 1e-20, 1e20)


# -- separable precision sums ---------------------------------------------


def _precision_grad(f: TradeoffFunction, r: float) -> float:
    try:
        return f.precision_derivative(r)
    except DerivativeSingularityError:
        return math.inf


def precision_sum(fs: Sequence[TradeoffFunction], r: np.ndarray) -> float:
    return math.fsum(f.precision(x) for f, x in zip(fs, r))


def solve_simplex_generic(
    fs: Sequence[TradeoffFunction],
    c: SimplexConstraint,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolverReport:
    """Maximize ``sum_i q_i(r_i)`` over ``c`` starting from the uniform point."""
    fs = list(fs)
    n = len(fs)

    def neg(r):
        val = -precision_sum(fs, r)
        grad = -np.array([_precision_grad(f, x) for f, x in zip(fs, r)])
        return val, grad

    rep = minimize_projected(neg, c.interior_point(n), c, tol=tol, max_iter=max_iter, scaling="diagonal")
    rep.objective = -rep.objective
    rep.details["sense"] = "maximize"
    return rep


def solve_best_source(sigma_sq: Sequence[float], R: float) -> np.ndarray:
    """All of the budget to the source with smallest intrinsic variance (lowest index on ties)."""
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    r = np.zeros(sigma_sq.size)
    r[int(np.argmin(sigma_sq))] = R
    return r


def solve_power_kkt(sigma_sq: Sequence[float], alpha: float, R: float) -> np.ndarray:
    """Closed-form maximizer of ``sum_i r_i**alpha / sigma_i^2`` over ``R`` times the simplex.

    ``alpha >= 1`` falls back to the best-source rule, the ``alpha -> 1`` limit.
    """
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    if np.any(sigma_sq <= 0):
        raise DomainError("sigma_sq must be positive")
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if alpha >= 1.0:
        return solve_best_source(sigma_sq, R)
    # work in logs: the exponent 1/(alpha-1) blows up as alpha -> 1
    logw = np.log(sigma_sq / alpha) / (alpha - 1.0)
    w = np.exp(logw - logw.max())
    return R * w / w.sum()


def water_level(a: Sequence[float], total: float = 1.0) -> float:
    """Level ``A`` with ``sum_i max(0, A - a_i) = total``, solved exactly after sorting."""
    a = np.sort(np.asarray(a, dtype=float))
    if np.any(a <= 0):
        raise DomainError("channel parameters a must be positive")
    csum = np.cumsum(a)
    for k in range(1, a.size + 1):
        level = (total + csum[k - 1]) / k
        if k == a.size or level <= a[k]:
            return float(level)
    raise AssertionError("unreachable")


def solve_water_filling(
    sigma_sq: Sequence[float], a: Sequence[float], R: float, budget_ref: float | None = None
) -> np.ndarray:
    """Water-filling allocation for ``q_i(r) = 1/sigma_i^2 + log(1 + (r/B)/a_i)``.

    With ``B = R`` (the default) the result is ``R * max(0, A - a_i)``. The
    allocation ignores ``sigma_sq``: initial quality does not change marginal
    returns.
    """
    a = np.asarray(a, dtype=float)
    if len(sigma_sq) != a.size:
        raise DomainError("sigma_sq and a differ in length")
    B = R if budget_ref is None else float(budget_ref)
    level = water_level(a, R / B)
    return B * np.maximum(0.0, level - a)


def closed_form_for(fs: Sequence[TradeoffFunction], c: SimplexConstraint) -> tuple[str, np.ndarray] | None:
    """The applicable closed form for a catalog family, if any."""
    if not c.is_pure() or not fs:
        return None
    kinds = {f.kind for f in fs}
    if len(kinds) != 1:
        return None
    kind = kinds.pop()
    sig = [f.sigma_sq for f in fs]
    if kind == LINEAR:
        return "best_source", solve_best_source(sig, c.budget)
    if kind == POWER and len({f.alpha for f in fs}) == 1:
        return "power_kkt", solve_power_kkt(sig, fs[0].alpha, c.budget)
    if kind == LOG_CHANNEL and len({f.budget_ref for f in fs}) == 1:
        return "water_filling", solve_water_filling(sig, [f.a for f in fs], c.budget, fs[0].budget_ref)
    return None


def solve_simplex(
    fs: Sequence[TradeoffFunction],
    c: SimplexConstraint,
    method: str = "auto",
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolverReport:
    """Maximize the precision sum, via a closed form when one applies (``method='auto'``)."""
    if method not in ("auto", "generic", "closed_form"):
        raise ValueError(f"unknown method {method!r}")
    if method != "generic":
        cf = closed_form_for(fs, c)
        if cf is not None:
            name, r = cf
            return SolverReport(r, precision_sum(fs, r), 0, True, 0.0, {"method": name, "sense": "maximize"})
        if method == "closed_form":
            raise DomainError("no closed form applies to this family/constraint")
    rep = solve_simplex_generic(fs, c, tol=tol, max_iter=max_iter)
    rep.details["method"] = "projected_gradient"
    return rep
