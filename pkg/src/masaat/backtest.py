"""Daily-rebalanced long-only backtesting and the AR / MDD / SR metric suite.

Accounting model: on day t the strategy chooses weights from information up
to day t-1 (no look-ahead), the day's per-asset gross return x_t is applied,
and a proportional cost on turnover against the drifted previous weights is
charged. Equity compounds multiplicatively from an initial value of 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .data import MarketFrame, window
from .errors import AccountingError, ConfigError, RangeError, ZeroVolatilityError
from .model import MasaatPolicy


@dataclass(frozen=True)
class MetricConfig:
    trading_days_per_year: int = 252
    risk_free_rate: float = 0.0
    transaction_cost: float = 0.0

    def __post_init__(self):
        if self.trading_days_per_year < 1:
            raise ConfigError("trading_days_per_year must be >= 1")
        if not (0.0 <= self.transaction_cost < 1.0):
            raise ConfigError("transaction_cost must lie in [0, 1)")


@dataclass(frozen=True)
class ReturnsRecord:
    gross: float  # rho_t = C_t / C_{t-1}
    net: float    # r_t = rho_t - 1


@dataclass(frozen=True)
class BacktestState:
    """Accounting state carried between days."""

    value: float = 1.0
    drifted_weights: np.ndarray | None = None  # previous weights after price drift
    day: int = 0

    def __post_init__(self):
        if self.value <= 0:
            raise AccountingError(f"portfolio value must stay positive, got {self.value}")


def _require_simplex(w: np.ndarray) -> None:
    if np.any(w < -1e-12) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError(f"weights are not on the simplex: sum={w.sum()!r}, min={w.min()!r}")


def step(state: BacktestState, weights: np.ndarray,
         relative_closes: np.ndarray,
         cfg: MetricConfig = MetricConfig()) -> tuple[BacktestState, ReturnsRecord]:
    """Advance one trading day.

    Turnover is measured against the previous weights drifted by the prior
    day's returns; the very first day is free by convention (the initial
    allocation from cash costs nothing).
    """
    w = np.asarray(weights, dtype=np.float64)
    x = np.asarray(relative_closes, dtype=np.float64)
    _require_simplex(w)
    if np.any(x <= 0):
        raise AccountingError("relative closes must be positive")
    if state.drifted_weights is None:
        turnover = 0.0
    else:
        turnover = float(np.abs(w - state.drifted_weights).sum())
    growth = float(w @ x)
    gross = growth * (1.0 - cfg.transaction_cost * turnover)
    if gross <= 0:
        raise AccountingError(f"non-positive day return {gross} "
                              f"(growth={growth}, turnover={turnover})")
    drifted = (w * x) / growth
    new_state = BacktestState(value=state.value * gross, drifted_weights=drifted,
                              day=state.day + 1)
    return new_state, ReturnsRecord(gross=gross, net=gross - 1.0)


def annualised_return(start_value: float, end_value: float, days: int,
                      trading_days_per_year: int = 252) -> float:
    """Compound annual growth of the equity curve, in percent."""
    if start_value <= 0 or end_value <= 0:
        raise ValueError("portfolio values must be positive")
    if days < 1:
        raise ValueError("need at least one trading day")
    return ((end_value / start_value) ** (trading_days_per_year / days) - 1.0) * 100.0


def max_drawdown(curve: Sequence[float]) -> float:
    """Largest peak-to-trough loss over the curve, in percent.

    Runs in O(T) with a running peak; equals the all-pairs definition
    max_{t1 < t2} (C_t1 - C_t2) / C_t1 exactly.
    """
    values = np.asarray(curve, dtype=np.float64)
    if len(values) < 2:
        raise ValueError("drawdown needs a curve of length >= 2")
    if np.any(values <= 0):
        raise ValueError("equity curve must be positive")
    peak = values[0]
    worst = 0.0
    for v in values[1:]:
        if v > peak:
            peak = v
        else:
            dd = (peak - v) / peak
            if dd > worst:
                worst = dd
    return worst * 100.0


def sharpe_ratio(annual_return: float, risk_free_rate: float,
                 daily_returns: Sequence[float],
                 trading_days_per_year: int = 252) -> float:
    """(AR - r_f) / sigma_p with both on the decimal (not percent) scale.

    sigma_p is the annualised volatility sqrt(T_yr / (T-1) * sum (r - mean)^2).
    A zero-volatility series has no defined ratio and raises instead of
    returning an infinity.
    """
    r = np.asarray(daily_returns, dtype=np.float64)
    if len(r) < 2:
        raise ValueError("sharpe ratio needs at least 2 daily returns")
    deviations = r - r.mean()
    sigma = math.sqrt(trading_days_per_year / (len(r) - 1.0) * float(deviations @ deviations))
    if sigma == 0.0:
        raise ZeroVolatilityError("volatility is zero; sharpe ratio undefined")
    return (annual_return - risk_free_rate) / sigma


# ----------------------------------------------------------------------
# strategies


class Strategy(Protocol):
    """Daily weight provider. ``decide(frame, t)`` may only use days < t."""

    def start(self, frame: MarketFrame, t0: int) -> None: ...

    def decide(self, frame: MarketFrame, t: int) -> np.ndarray: ...


class PolicyStrategy:
    """Adapter running a trained policy on the window ending the day before."""

    def __init__(self, policy: MasaatPolicy):
        self.policy = policy

    def start(self, frame: MarketFrame, t0: int) -> None:
        if frame.n_assets != self.policy.n_assets:
            raise ConfigError(f"frame has {frame.n_assets} assets, "
                              f"policy expects {self.policy.n_assets}")

    def decide(self, frame: MarketFrame, t: int) -> np.ndarray:
        obs = window(frame, t - 1, self.policy.window_len)
        return self.policy.portfolio(obs)


# ----------------------------------------------------------------------
# the harness


@dataclass(frozen=True)
class BacktestReport:
    """Equity curve, per-day records and the metric triplet for one run."""

    dates: tuple
    values: np.ndarray              # equity after each day, initial value excluded
    gross_returns: np.ndarray
    net_returns: np.ndarray
    weights: np.ndarray             # (T, N) weights the strategy chose
    initial_value: float
    ar_pct: float
    mdd_pct: float
    sharpe: float | None            # None when volatility is zero
    config: MetricConfig = field(default=MetricConfig())

    @property
    def final_value(self) -> float:
        return float(self.values[-1])

    @property
    def curve(self) -> np.ndarray:
        """Equity including the initial value, length T + 1."""
        return np.concatenate([[self.initial_value], self.values])

    def to_json_dict(self) -> dict:
        return {
            "ar_pct": self.ar_pct,
            "mdd_pct": self.mdd_pct,
            "sharpe": self.sharpe,
            "final_value": self.final_value,
            "days": int(len(self.values)),
            "config": {
                "trading_days_per_year": self.config.trading_days_per_year,
                "risk_free_rate": self.config.risk_free_rate,
                "transaction_cost": self.config.transaction_cost,
            },
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=1),
                              encoding="utf-8")

    def write_equity_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "value", "return"])
            for d, v, r in zip(self.dates, self.values, self.net_returns):
                writer.writerow([d.isoformat(), repr(float(v)), repr(float(r))])


def run_backtest(frame: MarketFrame, strategy: Strategy,
                 span: tuple[int, int],
                 cfg: MetricConfig = MetricConfig()) -> BacktestReport:
    """Simulate daily rebalancing over the inclusive day-index span.

    Weights for day t are requested before day t's prices are used, then the
    day's relative closes are applied through ``step``. The first tradable
    day is index 1 (a previous close must exist).
    """
    start, stop = span
    if start > stop:
        raise RangeError(f"empty backtest range {span}")
    if start < 1 or stop >= frame.n_days:
        raise RangeError(f"range {span} outside tradable days 1..{frame.n_days - 1}")

    strategy.start(frame, start)
    state = BacktestState()
    weights_rows, grosses, nets, values = [], [], [], []
    for t in range(start, stop + 1):
        w = strategy.decide(frame, t)
        state, rec = step(state, w, frame.relative_closes(t), cfg)
        weights_rows.append(np.asarray(w, dtype=np.float64))
        grosses.append(rec.gross)
        nets.append(rec.net)
        values.append(state.value)

    values_arr = np.asarray(values)
    nets_arr = np.asarray(nets)
    ar = annualised_return(1.0, float(values_arr[-1]), len(values_arr),
                           cfg.trading_days_per_year)
    mdd = max_drawdown(np.concatenate([[1.0], values_arr]))
    if len(nets_arr) < 2:
        sr = None
    else:
        try:
            sr = sharpe_ratio(ar / 100.0, cfg.risk_free_rate, nets_arr,
                              cfg.trading_days_per_year)
        except ZeroVolatilityError:
            sr = None
    return BacktestReport(
        dates=tuple(frame.calendar[start:stop + 1]),
        values=values_arr,
        gross_returns=np.asarray(grosses),
        net_returns=nets_arr,
        weights=np.vstack(weights_rows),
        initial_value=1.0,
        ar_pct=ar,
        mdd_pct=mdd,
        sharpe=sr,
        config=cfg,
    )
