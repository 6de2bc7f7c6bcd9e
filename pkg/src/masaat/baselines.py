"""Classical online portfolio selection baselines: CRP, EG and PAMR.

The update rules follow the standard formulations from the online portfolio
selection literature; every emitted weight vector satisfies the long-only
and full-investment constraints exactly.
"""

from __future__ import annotations

import numpy as np

from .data import MarketFrame
from .errors import ConfigError, NumericError


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1} via the sorting algorithm."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ConfigError("project_simplex expects a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise NumericError("project_simplex requires finite input")
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u)
    ranks = np.arange(1, v.size + 1)
    mask = u - (cumulative - 1.0) / ranks > 0
    k = int(np.nonzero(mask)[0][-1]) + 1
    theta = (cumulative[k - 1] - 1.0) / k
    return np.maximum(v - theta, 0.0)


def eg_update(w: np.ndarray, x: np.ndarray, eta: float) -> np.ndarray:
    """Multiplicative-update step toward yesterday's winners.

    w'_i is proportional to w_i * exp(eta * x_i / (w . x)); eta = 0 keeps
    the portfolio unchanged.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if eta < 0:
        raise ConfigError("eta must be non-negative")
    if np.any(x <= 0):
        raise NumericError("price relatives must be positive")
    updated = w * np.exp(eta * x / float(w @ x))
    return updated / updated.sum()


def pamr_update(w: np.ndarray, x: np.ndarray, epsilon: float) -> np.ndarray:
    """Passive-aggressive mean-reversion step (no aggressiveness cap).

    Passive while the realised relative w . x stays at or below epsilon;
    otherwise steps against the deviation of x from its mean and projects
    back onto the simplex.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if epsilon < 0:
        raise ConfigError("epsilon must be non-negative")
    loss = max(0.0, float(w @ x) - epsilon)
    if loss == 0.0:
        return w.copy()
    centered = x - x.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        return w.copy()
    tau = loss / denom
    return project_simplex(w - tau * centered)


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


class CRP:
    """Constant rebalanced portfolio: the same weights every day."""

    def __init__(self, weights: np.ndarray | None = None):
        self.fixed = None if weights is None else np.asarray(weights, dtype=np.float64)
        if self.fixed is not None:
            if np.any(self.fixed < 0) or abs(self.fixed.sum() - 1.0) > 1e-9:
                raise ConfigError("CRP weights must lie on the simplex")
        self._w: np.ndarray | None = None

    def start(self, frame: MarketFrame, t0: int) -> None:
        self._w = self.fixed if self.fixed is not None \
            else uniform_weights(frame.n_assets)

    def decide(self, frame: MarketFrame, t: int) -> np.ndarray:
        return self._w.copy()


class _OnlineBaseline:
    """Shared plumbing: start uniform, update from yesterday's relatives."""

    def __init__(self):
        self._w: np.ndarray | None = None
        self._t0: int | None = None

    def start(self, frame: MarketFrame, t0: int) -> None:
        self._w = uniform_weights(frame.n_assets)
        self._t0 = t0

    def _update(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decide(self, frame: MarketFrame, t: int) -> np.ndarray:
        if t > self._t0:
            self._w = self._update(frame.relative_closes(t - 1))
        return self._w.copy()


class EG(_OnlineBaseline):
    """Exponential gradient follow-the-winner strategy."""

    def __init__(self, eta: float = 0.05):
        super().__init__()
        if eta <= 0:
            raise ConfigError("eta must be positive")
        self.eta = eta

    def _update(self, x: np.ndarray) -> np.ndarray:
        return eg_update(self._w, x, self.eta)


class PAMR(_OnlineBaseline):
    """Passive aggressive mean reversion, variant without a step cap."""

    def __init__(self, epsilon: float = 0.5):
        super().__init__()
        if epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        self.epsilon = epsilon

    def _update(self, x: np.ndarray) -> np.ndarray:
        return pamr_update(self._w, x, self.epsilon)


def make_baseline(name: str, n_assets: int | None = None):
    """Factory for the CLI: crp | eg | pamr."""
    key = name.lower()
    if key == "crp":
        return CRP()
    if key == "eg":
        return EG()
    if key == "pamr":
        return PAMR()
    raise ConfigError(f"unknown baseline {name!r}; expected crp, eg or pamr")
