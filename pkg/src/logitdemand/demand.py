"""Multinomial logit share layer.

Observed quantities become market shares, shares invert analytically into
mean utilities (log s_jt - log s_0t with the outside utility normalized to
zero), and mean utilities map back to predicted shares in closed form. The
share denominator includes the outside option's exp(0) = 1, which is the only
convention under which inversion and prediction are exact inverses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutsideShareNonPositiveError, ZeroQuantityError

_SHARE_SUM_TOL = 1e-12


@dataclass(frozen=True)
class MarketPeriod:
    """One period's observed market: products, unit sales, potential consumers."""

    period: int
    products: tuple
    quantities: np.ndarray
    market_size: float

    def __post_init__(self):
        q = np.asarray(self.quantities, dtype=float).reshape(-1)
        object.__setattr__(self, "quantities", q)
        object.__setattr__(self, "products", tuple(self.products))
        if len(self.products) != q.shape[0]:
            raise ValueError("products and quantities must align")
        if not np.all(np.isfinite(q)):
            raise ValueError("quantities must be finite")
        if self.market_size <= 0 or not math.isfinite(self.market_size):
            raise ValueError("market_size must be positive and finite")
        if np.any(q == 0):
            bad = [p for p, v in zip(self.products, q) if v == 0]
            raise ZeroQuantityError(
                f"zero quantity for {bad} in period {self.period}; log share undefined"
            )
        if np.any(q < 0):
            raise ValueError("quantities must be non-negative")
        if float(q.sum()) >= self.market_size:
            raise OutsideShareNonPositiveError(
                f"period {self.period}: total quantity {q.sum():g} >= market size "
                f"{self.market_size:g}; outside share must stay positive"
            )


@dataclass(frozen=True)
class PeriodShares:
    """Inside shares plus the outside share for a single period; sums to one."""

    products: tuple
    inside: np.ndarray
    outside: float

    def __post_init__(self):
        s = np.asarray(self.inside, dtype=float).reshape(-1)
        object.__setattr__(self, "inside", s)
        object.__setattr__(self, "products", tuple(self.products))
        if len(self.products) != s.shape[0]:
            raise ValueError("products and inside shares must align")
        # Strictly positive so logs exist; the top is closed because a share
        # one ulp below 1.0 collapses to 1.0 in float64 at extreme utilities.
        if np.any(s <= 0.0) or np.any(s > 1.0):
            raise ValueError("inside shares must lie in (0, 1]")
        if not 0.0 < self.outside <= 1.0:
            raise ValueError("outside share must lie in (0, 1]")
        if abs(float(s.sum()) + self.outside - 1.0) > _SHARE_SUM_TOL:
            raise ValueError("shares must sum to one")


@dataclass(frozen=True)
class ShareTable:
    """Per-period share blocks keyed by period identifier."""

    periods: dict

    def __post_init__(self):
        object.__setattr__(self, "periods", dict(self.periods))
        for t, block in self.periods.items():
            if not isinstance(block, PeriodShares):
                raise TypeError(f"period {t}: expected PeriodShares")


@dataclass(frozen=True)
class MeanUtilityTable:
    """Per-period mean utilities; the outside option is pinned at zero."""

    periods: dict
    outside_utility: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "periods", dict(self.periods))
        if self.outside_utility != 0.0:
            raise ValueError("outside utility is normalized to zero")
        for t, (products, delta) in self.periods.items():
            d = np.asarray(delta, dtype=float).reshape(-1)
            if not np.all(np.isfinite(d)):
                raise ValueError(f"period {t}: mean utilities must be finite")
            self.periods[t] = (tuple(products), d)


def shares_from_quantities(market: MarketPeriod) -> ShareTable:
    """Observed shares s_jt = q_jt / N_t with outside share 1 - sum."""
    inside = market.quantities / market.market_size
    outside = 1.0 - float(inside.sum())
    block = PeriodShares(products=market.products, inside=inside, outside=outside)
    return ShareTable(periods={market.period: block})


def invert_shares(shares: ShareTable) -> MeanUtilityTable:
    """Analytic inversion: delta_jt = log s_jt - log s_0t per period."""
    out = {}
    for t, block in shares.periods.items():
        delta = np.log(block.inside) - math.log(block.outside)
        out[t] = (block.products, delta)
    return MeanUtilityTable(periods=out)


def predict_shares(delta: MeanUtilityTable, period) -> ShareTable:
    """Closed-form logit shares for one period.

    s_jt = exp(delta_jt) / (1 + sum_k exp(delta_kt)); the 1 is the outside
    option's exp(0). Evaluated with a max shift so |delta| up to ~700 is safe.
    """
    if period not in delta.periods:
        raise KeyError(f"period {period!r} not present")
    products, d = delta.periods[period]
    shift = max(0.0, float(np.max(d))) if d.size else 0.0
    expd = np.exp(d - shift)
    denom = math.exp(-shift) + float(expd.sum())
    inside = expd / denom
    outside = math.exp(-shift) / denom
    return ShareTable(periods={period: PeriodShares(products, inside, outside)})


def binary_choice_probability(delta_j: float, delta_k: float) -> float:
    """Probability that option j beats option k under logit taste shocks."""
    if not (math.isfinite(delta_j) and math.isfinite(delta_k)):
        raise ValueError("utilities must be finite")
    m = max(delta_j, delta_k)
    ej = math.exp(delta_j - m)
    ek = math.exp(delta_k - m)
    return ej / (ej + ek)
