"""Monte Carlo checks of predicted losses and error bounds.

Trials run in fixed-size blocks. Block ``k`` draws from a PCG64 stream seeded
by child ``k`` of ``SeedSequence(seed)``, so results depend only on
``(seed, trials, block_size)`` and not on how many workers process the blocks.
Per-block sums are merged in block order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .aggregation import AggregationWeights, optimal_weights_single, optimal_weights_supported
from .errors import DomainError, ShapeMismatchError
from .halfspace import ElectionProblem, bernstein_bound, indirect_bias, indirect_variance
from .linear_design import DesignProblem, _inverse_info, radius_from_covariance
from .support_alloc import SupportProblem

BLOCK_SIZE = 10_000
PASS_SIGMAS = 3.0


@dataclass(frozen=True)
class SimulationSpec:
    """What to simulate: a model, the true parameter, and the Monte Carlo budget."""

    model: Any
    true_theta: np.ndarray
    trials: int = 100_000
    seed: int = 0
    block_size: int = BLOCK_SIZE
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.block_size < 1:
            raise ValueError("block_size must be at least 1")
        object.__setattr__(self, "true_theta", np.asarray(self.true_theta, dtype=float))


@dataclass
class SimulationReport:
    empirical_risk: float
    predicted_risk: float
    std_error: float
    passed: bool
    trials: int
    check: str
    extras: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "empirical_risk": self.empirical_risk,
            "predicted_risk": self.predicted_risk,
            "std_error": self.std_error,
            "pass": self.passed,
            "trials": self.trials,
            **self.extras,
        }


def _run_blocks(spec: SimulationSpec, block_fn: Callable[[np.random.Generator, int], np.ndarray]) -> np.ndarray:
    """Sum ``block_fn(rng, n)`` over all blocks in block order."""
    n_blocks = -(-spec.trials // spec.block_size)
    children = np.random.SeedSequence(spec.seed).spawn(n_blocks)
    sizes = [min(spec.block_size, spec.trials - k * spec.block_size) for k in range(n_blocks)]

    def one(k):
        return block_fn(np.random.Generator(np.random.PCG64(children[k])), sizes[k])

    if spec.workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as ex:
            parts = list(ex.map(one, range(n_blocks)))
    else:
        parts = [one(k) for k in range(n_blocks)]
    total = parts[0].copy()
    for part in parts[1:]:
        total += part
    return total


def _mean_se(s: float, s2: float, n: int) -> tuple[float, float]:
    mean = s / n
    if n < 2:
        return mean, math.inf
    var = max(s2 - n * mean * mean, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


# -- aggregation of Gaussian sources --------------------------------------


@dataclass(frozen=True)
class GaussianSources:
    """Independent Gaussian sources; source ``i`` observes ``supports[i]`` with the given variances."""

    d: int
    supports: tuple[tuple[int, ...], ...]
    variances: tuple[np.ndarray, ...]

    @classmethod
    def shared_support(cls, losses: Sequence[float], d: int) -> "GaussianSources":
        """Every source observes all ``d`` coordinates; total MSE of source ``i`` is ``losses[i]``."""
        sup = tuple(range(d))
        return cls(d, (sup,) * len(losses), tuple(np.full(d, l / d) for l in losses))

    @classmethod
    def from_support_problem(cls, p: SupportProblem, r: Sequence[float]) -> "GaussianSources":
        """Sources of ``p`` at allocation ``r``.

        Coordinates with infinite loss (no resource) are dropped from a
        source's support; they would get zero weight anyway.
        """
        sups, var = [], []
        for i, s in enumerate(p.sources):
            v = np.array([f.loss(r[i]) for f in s.tradeoffs])
            keep = np.isfinite(v)
            if keep.any():
                sups.append(tuple(j for j, k in zip(s.support, keep) if k))
                var.append(v[keep])
        return cls(p.d, tuple(sups), tuple(var))

    def optimal_weights(self) -> AggregationWeights:
        if all(s == tuple(range(self.d)) for s in self.supports) and all(
            np.all(v == v[0]) for v in self.variances
        ):
            return optimal_weights_single([v.sum() for v in self.variances])
        # per-coordinate variances act as unit-resource losses
        from .sources import SourceModel
        from .tradeoffs import linear_precision

        srcs = [
            SourceModel.per_coordinate(s, [linear_precision(x) for x in v])
            for s, v in zip(self.supports, self.variances)
        ]
        return optimal_weights_supported(srcs, np.ones(len(srcs)), self.d)

    def uniform_weights(self) -> np.ndarray:
        """``(d, N)`` weights averaging the sources that observe each coordinate."""
        W = np.zeros((self.d, len(self.supports)))
        for i, s in enumerate(self.supports):
            W[list(s), i] = 1.0
        return W / W.sum(axis=1, keepdims=True)

    def weight_matrix(self, w: AggregationWeights | np.ndarray) -> np.ndarray:
        if isinstance(w, np.ndarray):
            return w
        W = w.dense()
        return np.repeat(W, self.d, axis=0) if W.shape[0] == 1 else W

    def predicted_mse(self, W: np.ndarray) -> float:
        tot = 0.0
        for i, (s, v) in enumerate(zip(self.supports, self.variances)):
            tot += float(np.sum(W[list(s), i] ** 2 * v))
        return tot


def simulate_mse(spec: SimulationSpec, weights=None, compare_uniform: bool = False) -> SimulationReport:
    """Empirical MSE of the aggregated estimate against its predicted value.

    ``spec.model`` is a :class:`GaussianSources`. Without ``weights`` the
    optimal ones are used and the prediction is ``sum_j 1 / sum_{i in I_j} 1/var``.
    With ``compare_uniform`` the same draws are also aggregated with uniform
    weights and the paired difference is reported.
    """
    model: GaussianSources = spec.model
    theta = spec.true_theta
    if theta.shape != (model.d,):
        raise ShapeMismatchError(f"true_theta has shape {theta.shape}, expected ({model.d},)")
    if not all(np.all(np.isfinite(v)) and np.all(v > 0) for v in model.variances):
        raise DomainError("simulated sources need finite positive variances")
    W = model.weight_matrix(model.optimal_weights() if weights is None else weights)
    U = model.uniform_weights()
    sds = [np.sqrt(v) for v in model.variances]
    cols = [list(s) for s in model.supports]
    d = model.d

    def block(rng, n):
        est = np.zeros((n, d))
        est_u = np.zeros((n, d))
        for i, (c, sd) in enumerate(zip(cols, sds)):
            draw = theta[c] + sd * rng.standard_normal((n, len(c)))
            est[:, c] += W[c, i] * draw
            if compare_uniform:
                est_u[:, c] += U[c, i] * draw
        err = ((est - theta) ** 2).sum(axis=1)
        out = [err.sum(), (err**2).sum()]
        out += list(est.sum(axis=0)) + list((est**2).sum(axis=0))
        if compare_uniform:
            err_u = ((est_u - theta) ** 2).sum(axis=1)
            diff = err_u - err
            out += [err_u.sum(), (err_u**2).sum(), diff.sum(), (diff**2).sum()]
        return np.array(out)

    tot = _run_blocks(spec, block)
    n = spec.trials
    emp, se = _mean_se(tot[0], tot[1], n)
    pred = model.predicted_mse(W)
    means = tot[2 : 2 + d] / n
    sq = tot[2 + d : 2 + 2 * d]
    coord_se = np.sqrt(np.maximum(sq / n - means**2, 0.0) / max(n - 1, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(coord_se > 0, np.abs(means - theta) / coord_se, 0.0)
    extras: dict[str, Any] = {"bias_z_max": float(z.max()), "coordinate_means": means.tolist()}
    if compare_uniform:
        k = 2 + 2 * d
        emp_u, se_u = _mean_se(tot[k], tot[k + 1], n)
        gap, gap_se = _mean_se(tot[k + 2], tot[k + 3], n)
        extras.update(
            uniform_risk=emp_u,
            uniform_std_error=se_u,
            uniform_predicted=model.predicted_mse(U),
            uniform_gap=gap,
            uniform_gap_std_error=gap_se,
        )
    return SimulationReport(emp, pred, se, bool(abs(emp - pred) <= PASS_SIGMAS * se), n, "mse", extras)


# -- halfspace decisions --------------------------------------------------


def simulate_decision(spec: SimulationSpec, allocation: Sequence[float]) -> SimulationReport:
    """Error frequency of the rule ``<theta_hat, c> > b`` against its Bernstein bound.

    ``spec.model`` is an :class:`ElectionProblem`. The bound is evaluated at
    the actual advantage ``<theta, c> - b`` of ``spec.true_theta``. Indirect
    mode flips each true bit with probability ``l_i(r_i)``; direct mode adds
    Gaussian noise with variance ``v_i(r_i)``.
    """
    p: ElectionProblem = spec.model
    r = np.asarray(allocation, dtype=float)
    theta = spec.true_theta
    if theta.shape != (p.d,):
        raise ShapeMismatchError(f"true_theta has shape {theta.shape}, expected ({p.d},)")
    ell = np.array([f.loss(x) for f, x in zip(p.losses, r)])
    adv = float(theta @ p.c) - p.b
    c_inf = float(p.c.max())
    c = p.c
    if p.mode == "indirect":
        if not np.all((theta == 0) | (theta == 1)):
            raise ValueError("indirect elections need a 0/1 true_theta")
        gap = adv - indirect_bias(p, r)
        bound = 1.0 if gap <= 0 else math.exp(-(gap**2 / 2) / (indirect_variance(p, r) + c_inf * gap / 3))

        def block(rng, n):
            flips = rng.random((n, p.d)) < ell
            est = np.where(flips, 1.0 - theta, theta)
            wrong = (est @ c) <= p.b
            return np.array([wrong.sum()], dtype=float)

    else:
        var = float(np.sum(c**2 * np.where(c > 0, ell, 0.0)))
        bound = bernstein_bound(adv, var, c_inf) if adv > 0 else 1.0
        sd = np.sqrt(np.where(np.isfinite(ell), ell, 0.0))

        def block(rng, n):
            est = theta + sd * rng.standard_normal((n, p.d))
            wrong = (est @ c) <= p.b
            return np.array([wrong.sum()], dtype=float)

    hits = _run_blocks(spec, block)[0]
    n = spec.trials
    freq = hits / n
    se = math.sqrt(max(freq * (1 - freq), 1.0 / n) / n)
    return SimulationReport(
        freq, bound, se, bool(freq <= bound), n, "decision_bound", {"advantage": adv, "errors": int(hits), "mode": p.mode}
    )


# -- linear measurements --------------------------------------------------


def simulate_tail(spec: SimulationSpec, allocation: Sequence[float], delta: float) -> SimulationReport:
    """Frequency of ``||theta_hat - theta||^2`` exceeding the radius for confidence ``1 - delta``."""
    p: DesignProblem = spec.model
    theta = spec.true_theta
    if theta.shape != (p.d,):
        raise ShapeMismatchError(f"true_theta has shape {theta.shape}, expected ({p.d},)")
    prec = p.precisions(allocation)
    active = prec > 0
    X = p.X[active]
    pr = prec[active]
    A = _inverse_info(X, pr)
    if A is None:
        raise ValueError("X^T P X is singular at this allocation")
    radius = radius_from_covariance(A, delta)
    H = A @ (X.T * pr)  # theta_hat = H y
    sd = 1.0 / np.sqrt(pr)
    mean = X @ theta

    def block(rng, n):
        y = mean + sd * rng.standard_normal((n, X.shape[0]))
        err = y @ H.T - theta
        exceed = (err**2).sum(axis=1) > radius
        return np.array([exceed.sum()], dtype=float)

    hits = _run_blocks(spec, block)[0]
    n = spec.trials
    freq = hits / n
    se = math.sqrt(max(freq * (1 - freq), 1.0 / n) / n)
    return SimulationReport(
        freq, delta, se, bool(freq <= delta), n, "tail_bound", {"delta": delta, "radius": radius, "mse_predicted": float(np.trace(A))}
    )
