"""Optimal linear aggregation of unbiased estimates with known losses.

For fixed losses the best convex combination weights each source by its
precision: ``w_i = (1/l_i) / sum_k (1/l_k)``, with aggregate loss
``1 / sum_k (1/l_k)``. With heterogeneous supports this holds coordinate by
coordinate over the sources observing that coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoInformationError, ShapeMismatchError, UnobservableCoordinateError
from .sources import SourceModel, reciprocal_sets


@dataclass(frozen=True)
class AggregationWeights:
    """Per-coordinate convex weights stored by reciprocal set.

    ``members[j]`` lists the sources observing coordinate ``j`` and
    ``row_weights[j]`` their weights. ``supports`` is ``None`` when every
    source observes every coordinate with the same weights (a single row).
    """

    members: tuple[np.ndarray, ...]
    row_weights: tuple[np.ndarray, ...]
    per_coord_loss: np.ndarray
    total_loss: float
    n_sources: int
    supports: tuple[tuple[int, ...], ...] | None = None

    @property
    def d(self) -> int:
        return len(self.members)

    @property
    def vector(self) -> np.ndarray:
        """The weight vector when a single row applies to all coordinates."""
        if len(self.members) != 1:
            raise ValueError("weights differ across coordinates; use dense()")
        return self.dense()[0]

    def dense(self) -> np.ndarray:
        """Weights as a ``(d, N)`` array, zero outside each reciprocal set."""
        out = np.zeros((len(self.members), self.n_sources))
        for j, (m, w) in enumerate(zip(self.members, self.row_weights)):
            out[j, m] = w
        return out


def _row(losses: np.ndarray) -> tuple[np.ndarray, float]:
    """Optimal weights and aggregate loss for one coordinate."""
    with np.errstate(divide="ignore"):
        prec = 1.0 / losses
    if np.any(np.isinf(prec)):
        # perfectly precise sources take all the weight
        exact = np.isinf(prec)
        return exact / exact.sum(), 0.0
    total = prec.sum()
    if total == 0.0:
        raise NoInformationError("all losses are infinite")
    return prec / total, 1.0 / total


def optimal_weights_single(losses: Sequence[float]) -> AggregationWeights:
    """Best convex combination of ``N`` estimators of the same parameter.

    Sources with infinite loss get weight zero.

    Examples
    --------
    >>> w = optimal_weights_single([1.0, 3.0])
    >>> w.vector.tolist(), w.total_loss
    ([0.75, 0.25], 0.75)
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 1 or losses.size == 0:
        raise ShapeMismatchError("losses must be a nonempty vector")
    if np.any(losses < 0) or np.any(np.isnan(losses)):
        raise ValueError("losses must be non-negative")
    w, total = _row(losses)
    members = np.arange(losses.size)
    return AggregationWeights((members,), (w,), np.array([total]), total, losses.size)


def optimal_weights_supported(sources: Sequence[SourceModel], r: Sequence[float], d: int) -> AggregationWeights:
    """Per-coordinate optimal weights for sources with heterogeneous supports."""
    r = np.asarray(r, dtype=float)
    if r.shape != (len(sources),):
        raise ShapeMismatchError(f"allocation has shape {r.shape}, expected ({len(sources)},)")
    sets = reciprocal_sets(sources, d)
    members, rows, per_coord = [], [], np.empty(d)
    for j, idx in enumerate(sets):
        losses = np.array([sources[i].tradeoff_for(j).loss(r[i]) for i in idx])
        try:
            w, loss = _row(losses)
        except NoInformationError:
            raise UnobservableCoordinateError(j, f"coordinate {j}: every observing source has infinite loss") from None
        members.append(np.asarray(idx))
        rows.append(w)
        per_coord[j] = loss
    total = math.fsum(per_coord)
    return AggregationWeights(
        tuple(members), tuple(rows), per_coord, total, len(sources), tuple(s.support for s in sources)
    )


def aggregate_estimates(estimates: Sequence[Sequence[float]], w: AggregationWeights) -> np.ndarray:
    """Combine per-source estimates with the given weights.

    Each ``estimates[i]`` holds one value per coordinate of source ``i``'s
    support (or per coordinate of the parameter when ``w`` has a single row).
    """
    if len(estimates) != w.n_sources:
        raise ShapeMismatchError(f"got {len(estimates)} estimates for {w.n_sources} sources")
    est = [np.asarray(e, dtype=float) for e in estimates]
    if w.supports is None:
        lengths = {e.size for e in est}
        if len(lengths) != 1:
            raise ShapeMismatchError("estimates must share one length when weights have a single row")
        lam = w.vector
        return sum(l * e for l, e in zip(lam, est))
    for i, (e, s) in enumerate(zip(est, w.supports)):
        if e.size != len(s):
            raise ShapeMismatchError(f"estimate {i} has {e.size} entries, support has {len(s)}")
    out = np.zeros(w.d)
    for j, (m, row) in enumerate(zip(w.members, w.row_weights)):
        out[j] = sum(lam * est[i][w.supports[i].index(j)] for i, lam in zip(m, row))
    return out
