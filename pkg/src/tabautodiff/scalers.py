"""Per-column numerical scalers: min-max and rank-based Gaussianization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

CLIP = 1e-7


@dataclass
class MinMaxScaler:
    lo: float
    hi: float

    kind = "minmax"

    @classmethod
    def fit(cls, values) -> "MinMaxScaler":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            raise ValueError("cannot fit a scaler on an empty column")
        return cls(float(v.min()), float(v.max()))

    @property
    def span(self) -> float:
        return self.hi - self.lo

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.span == 0.0:
            return np.zeros_like(x)
        return (x - self.lo) / self.span

    def inverse(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.span == 0.0:
            return np.full_like(y, self.lo)
        return self.lo + y * self.span

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass
class GaussianQuantileScaler:
    """Maps values through the empirical CDF (linear between knots) and then Φ⁻¹.

    Knots are the training values themselves when there are no more than
    ``n_quantiles`` of them, which makes ``inverse(transform(x)) == x`` exact
    on training data.
    """

    knots: np.ndarray
    refs: np.ndarray

    kind = "quantile"

    @classmethod
    def fit(cls, values, n_quantiles: int = 1000) -> "GaussianQuantileScaler":
        v = np.sort(np.asarray(values, dtype=np.float64))
        if v.size < 2:
            raise ValueError("quantile transform needs at least 2 values")
        if v.size <= n_quantiles:
            knots = v
        else:
            knots = np.quantile(v, np.linspace(0.0, 1.0, n_quantiles))
        refs = np.linspace(0.0, 1.0, knots.size)
        return cls(knots, refs)

    def _cdf(self, x: np.ndarray) -> np.ndarray:
        # average of forward and reversed interpolation so runs of tied knots
        # map to the middle of their rank range
        q, r = self.knots, self.refs
        return 0.5 * (np.interp(x, q, r) - np.interp(-x, -q[::-1], -r[::-1]))

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        p = np.clip(self._cdf(x), CLIP, 1.0 - CLIP)
        return ndtri(p)

    def inverse(self, y) -> np.ndarray:
        p = ndtr(np.asarray(y, dtype=np.float64))
        edge = CLIP * (1.0 + 1e-6)
        p = np.where(p <= edge, 0.0, np.where(p >= 1.0 - edge, 1.0, p))
        # snap rank positions that sit on a knot back onto it
        pos = p * (self.knots.size - 1)
        near = np.rint(pos)
        on_knot = np.abs(pos - near) < 1e-6
        out = np.interp(p, self.refs, self.knots)
        idx = np.clip(near.astype(np.int64), 0, self.knots.size - 1)
        return np.where(on_knot, self.knots[idx], out)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "knots": self.knots.tolist()}


def scaler_from_dict(d: dict):
    if d["kind"] == "minmax":
        return MinMaxScaler(float(d["lo"]), float(d["hi"]))
    if d["kind"] == "quantile":
        knots = np.asarray(d["knots"], dtype=np.float64)
        return GaussianQuantileScaler(knots, np.linspace(0.0, 1.0, knots.size))
    raise ValueError(f"unknown scaler kind {d['kind']!r}")


def fit_scaler(kind: str, values, n_quantiles: int = 1000):
    if kind == "minmax":
        return MinMaxScaler.fit(values)
    if kind == "quantile":
        return GaussianQuantileScaler.fit(values, n_quantiles)
    raise ValueError(f"unknown scaler kind {kind!r}; use 'minmax' or 'quantile'")
