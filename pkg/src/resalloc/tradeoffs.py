"""Resource/quality tradeoff functions.

Every source turns an amount of resource ``r >= 0`` into a quality, expressed
either as a loss ``l(r)`` (expected error, positive and non-increasing) or as
a precision ``q(r) = 1 / l(r)``. The catalog is closed:

=========================  ===============================================
kind                       formula
=========================  ===============================================
``linear_precision``       ``q(r) = r / sigma_sq``
``power_precision``        ``q(r) = r**alpha / sigma_sq``
``log_channel_precision``  ``q(r) = 1/sigma_sq + log(1 + (r/budget_ref)/a)``
``exp_margin_loss``        ``l(r) = 0.5 * exp(-r * eta**2 / 2)``
``custom_convex_loss``     piecewise-linear convex decreasing ``l``
=========================  ===============================================

The exponential margin loss is the error probability of a poll with margin
lower bound ``eta``. A loss of the form ``0.5 * exp(-r * eta**2)`` is the same
member with ``eta`` replaced by ``eta * sqrt(2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DerivativeSingularityError, DomainError

LINEAR = "linear_precision"
POWER = "power_precision"
LOG_CHANNEL = "log_channel_precision"
EXP_MARGIN = "exp_margin_loss"
CUSTOM = "custom_convex_loss"

KINDS = (LINEAR, POWER, LOG_CHANNEL, EXP_MARGIN, CUSTOM)
PRECISION_KINDS = (LINEAR, POWER, LOG_CHANNEL)


def _check_r(r: float) -> float:
    r = float(r)
    if not math.isfinite(r):
        raise DomainError(f"resource amount must be finite, got {r}")
    if r < 0.0:
        raise DomainError(f"resource amount must be non-negative, got {r}")
    return r


@dataclass(frozen=True)
class TradeoffFunction:
    """One member of the tradeoff catalog. Immutable; use the constructors below."""

    kind: str
    sigma_sq: float = 1.0
    alpha: float = 1.0
    a: float = 1.0
    budget_ref: float = 1.0
    eta: float = 0.5
    custom_table: tuple[tuple[float, float], ...] | None = None
    _slopes: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown tradeoff kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in PRECISION_KINDS and not self.sigma_sq > 0.0:
            raise DomainError(f"sigma_sq must be positive, got {self.sigma_sq}")
        if self.kind == POWER and not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.kind == LOG_CHANNEL:
            if not self.a > 0.0:
                raise DomainError(f"a must be positive, got {self.a}")
            if not self.budget_ref > 0.0:
                raise DomainError(f"budget_ref must be positive, got {self.budget_ref}")
        if self.kind == EXP_MARGIN and not 0.0 < self.eta <= 0.5:
            raise DomainError(f"eta must lie in (0, 1/2], got {self.eta}")
        if self.kind == CUSTOM:
            object.__setattr__(self, "_slopes", _validate_table(self.custom_table))

    # -- evaluation -----------------------------------------------------

    def precision(self, r: float) -> float:
        r = _check_r(r)
        k = self.kind
        if k == LINEAR:
            return r / self.sigma_sq
        if k == POWER:
            return r**self.alpha / self.sigma_sq
        if k == LOG_CHANNEL:
            return 1.0 / self.sigma_sq + math.log1p(r / (self.budget_ref * self.a))
        if k == EXP_MARGIN:
            return 2.0 * math.exp(r * self.eta**2 / 2.0)
        return 1.0 / self._custom_loss(r)

    def loss(self, r: float) -> float:
        r = _check_r(r)
        if self.kind == EXP_MARGIN:
            return 0.5 * math.exp(-r * self.eta**2 / 2.0)
        if self.kind == CUSTOM:
            return self._custom_loss(r)
        q = self.precision(r)
        return math.inf if q == 0.0 else 1.0 / q

    def precision_derivative(self, r: float) -> float:
        r = _check_r(r)
        k = self.kind
        if k == LINEAR:
            return 1.0 / self.sigma_sq
        if k == POWER:
            if r == 0.0:
                if self.alpha < 1.0:
                    raise DerivativeSingularityError("power precision derivative diverges at r = 0")
                return 1.0 / self.sigma_sq
            return self.alpha * r ** (self.alpha - 1.0) / self.sigma_sq
        if k == LOG_CHANNEL:
            return 1.0 / (self.budget_ref * self.a + r)
        if k == EXP_MARGIN:
            return self.eta**2 / 2.0 * self.precision(r)
        ell = self._custom_loss(r)
        return -self._custom_slope(r) / ell**2

    def loss_derivative(self, r: float) -> float:
        r = _check_r(r)
        k = self.kind
        if k == EXP_MARGIN:
            return -self.eta**2 / 2.0 * self.loss(r)
        if k == CUSTOM:
            return self._custom_slope(r)
        if k == LINEAR:
            if r == 0.0:
                raise DerivativeSingularityError("linear precision loss derivative diverges at r = 0")
            return -self.sigma_sq / r**2
        if k == POWER:
            if r == 0.0:
                raise DerivativeSingularityError("power precision loss derivative diverges at r = 0")
            return -self.alpha * self.sigma_sq * r ** (-self.alpha - 1.0)
        q = self.precision(r)
        return -self.precision_derivative(r) / q**2

    # -- inverses -------------------------------------------------------

    def inverse_loss(self, y: float) -> float:
        """Smallest resource amount achieving loss ``y``."""
        y = float(y)
        if not (math.isfinite(y) and y > 0.0):
            raise DomainError(f"target loss must be positive and finite, got {y}")
        k = self.kind
        if k == LINEAR:
            return self.sigma_sq / y
        if k == POWER:
            return (self.sigma_sq / y) ** (1.0 / self.alpha)
        if k == LOG_CHANNEL:
            excess = 1.0 / y - 1.0 / self.sigma_sq
            if excess < 0.0:
                raise DomainError(f"loss {y} exceeds the loss at zero resource ({self.sigma_sq})")
            return self.budget_ref * self.a * math.expm1(excess)
        if k == EXP_MARGIN:
            if y > 0.5:
                raise DomainError(f"loss {y} exceeds the loss at zero resource (0.5)")
            return -2.0 * math.log(2.0 * y) / self.eta**2
        return self._custom_inverse(y)

    def inverse_precision(self, y: float) -> float:
        """Smallest resource amount achieving precision ``y``."""
        y = float(y)
        if not (math.isfinite(y) and y > 0.0):
            raise DomainError(f"target precision must be positive and finite, got {y}")
        return self.inverse_loss(1.0 / y)

    # -- custom table helpers ------------------------------------------

    def _custom_loss(self, r: float) -> float:
        xs, ys = zip(*self.custom_table)
        return float(np.interp(r, xs, ys))

    def _custom_slope(self, r: float) -> float:
        xs = [p[0] for p in self.custom_table]
        k = int(np.searchsorted(xs, r, side="right")) - 1
        return self._slopes[k] if k < len(self._slopes) else 0.0

    def _custom_inverse(self, y: float) -> float:
        table = self.custom_table
        if y > table[0][1]:
            raise DomainError(f"loss {y} exceeds the loss at zero resource ({table[0][1]})")
        for (x0, y0), (x1, y1) in zip(table, table[1:]):
            if y1 <= y <= y0:
                if y0 == y1:
                    return x0
                return x0 + (y0 - y) * (x1 - x0) / (y0 - y1)
        raise DomainError(f"loss {y} is below the smallest tabulated loss {table[-1][1]}")

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        k = self.kind
        if k == LINEAR:
            return {"kind": k, "sigma_sq": self.sigma_sq}
        if k == POWER:
            return {"kind": k, "sigma_sq": self.sigma_sq, "alpha": self.alpha}
        if k == LOG_CHANNEL:
            return {"kind": k, "sigma_sq": self.sigma_sq, "a": self.a, "budget_ref": self.budget_ref}
        if k == EXP_MARGIN:
            return {"kind": k, "eta": self.eta}
        return {"kind": k, "table": [list(p) for p in self.custom_table]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TradeoffFunction":
        kind = d["kind"]
        if kind == LINEAR:
            return linear_precision(d["sigma_sq"])
        if kind == POWER:
            return power_precision(d["sigma_sq"], d["alpha"])
        if kind == LOG_CHANNEL:
            return log_channel_precision(d.get("sigma_sq", 1.0), d["a"], d.get("budget_ref", 1.0))
        if kind == EXP_MARGIN:
            return exp_margin_loss(d["eta"])
        if kind == CUSTOM:
            return custom_convex_loss(d["table"])
        raise DomainError(f"unknown tradeoff kind {kind!r}")


def _validate_table(table) -> tuple[float, ...]:
    if table is None or len(table) < 2:
        raise DomainError("custom table needs at least two (resource, loss) samples")
    xs = [float(p[0]) for p in table]
    ys = [float(p[1]) for p in table]
    if xs[0] != 0.0:
        raise DomainError("custom table must start at resource 0")
    if any(x1 <= x0 for x0, x1 in zip(xs, xs[1:])):
        raise DomainError("custom table resources must be strictly increasing")
    if any(not (math.isfinite(y) and y > 0.0) for y in ys):
        raise DomainError("custom table losses must be positive and finite")
    slopes = [(y1 - y0) / (x1 - x0) for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:])]
    if any(s > 0.0 for s in slopes):
        raise DomainError("custom table losses must be non-increasing")
    scale = max(abs(s) for s in slopes) or 1.0
    if any(s1 < s0 - 1e-12 * scale for s0, s1 in zip(slopes, slopes[1:])):
        raise DomainError("custom table losses must be convex (slopes non-decreasing)")
    return tuple(slopes)


def linear_precision(sigma_sq: float) -> TradeoffFunction:
    return TradeoffFunction(LINEAR, sigma_sq=float(sigma_sq))


def power_precision(sigma_sq: float, alpha: float) -> TradeoffFunction:
    return TradeoffFunction(POWER, sigma_sq=float(sigma_sq), alpha=float(alpha))


def log_channel_precision(sigma_sq: float, a: float, budget_ref: float = 1.0) -> TradeoffFunction:
    return TradeoffFunction(LOG_CHANNEL, sigma_sq=float(sigma_sq), a=float(a), budget_ref=float(budget_ref))


def exp_margin_loss(eta: float) -> TradeoffFunction:
    return TradeoffFunction(EXP_MARGIN, eta=float(eta))


def custom_convex_loss(table: Sequence[Sequence[float]]) -> TradeoffFunction:
    """Piecewise-linear loss through ``(resource, loss)`` samples, flat past the last one."""
    tbl = tuple((float(x), float(y)) for x, y in table)
    return TradeoffFunction(CUSTOM, custom_table=tbl)


def eval_precision(f: TradeoffFunction, r: float) -> float:
    return f.precision(r)


def eval_loss(f: TradeoffFunction, r: float) -> float:
    return f.loss(r)


def eval_precision_derivative(f: TradeoffFunction, r: float) -> float:
    return f.precision_derivative(r)
