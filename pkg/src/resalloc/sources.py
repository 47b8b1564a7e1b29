"""Source descriptions shared by the aggregation and allocation modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError, UnobservableCoordinateError
from .tradeoffs import TradeoffFunction


@dataclass(frozen=True)
class SourceModel:
    """A data source observing the coordinates ``support`` (0-based, increasing).

    ``tradeoffs[k]`` is the precision/loss function of coordinate
    ``support[k]``. Use :meth:`shared` when one function applies to every
    observed coordinate.
    """

    support: tuple[int, ...]
    tradeoffs: tuple[TradeoffFunction, ...]

    def __post_init__(self):
        if len(self.support) == 0:
            raise DomainError("source support must be nonempty")
        if any(j < 0 for j in self.support):
            raise DomainError(f"support indices must be non-negative: {self.support}")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise DomainError(f"support indices must be strictly increasing: {self.support}")
        if len(self.tradeoffs) != len(self.support):
            raise DomainError("one tradeoff function is needed per supported coordinate")

    @classmethod
    def shared(cls, support: Sequence[int], tradeoff: TradeoffFunction) -> "SourceModel":
        support = tuple(int(j) for j in support)
        return cls(support, (tradeoff,) * len(support))

    @classmethod
    def per_coordinate(cls, support: Sequence[int], tradeoffs: Sequence[TradeoffFunction]) -> "SourceModel":
        return cls(tuple(int(j) for j in support), tuple(tradeoffs))

    def tradeoff_for(self, j: int) -> TradeoffFunction:
        return self.tradeoffs[self.support.index(j)]


def reciprocal_sets(sources: Sequence[SourceModel], d: int) -> list[tuple[int, ...]]:
    """For each coordinate ``j``, the indices of the sources whose support contains ``j``.

    Raises :class:`UnobservableCoordinateError` for a coordinate no source observes.
    """
    sets: list[list[int]] = [[] for _ in range(d)]
    for i, s in enumerate(sources):
        for j in s.support:
            if j >= d:
                raise DomainError(f"source {i} observes coordinate {j} outside [0, {d})")
            sets[j].append(i)
    for j, members in enumerate(sets):
        if not members:
            raise UnobservableCoordinateError(j)
    return [tuple(m) for m in sets]
