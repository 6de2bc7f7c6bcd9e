"""Directional-change event detection and DC feature construction.

A price series is scanned once, left to right. Before any confirmation both
running extremes are tracked; an upward event is confirmed at the first index
where price >= running_low * (1 + threshold), a downward event at the first
index where price <= running_high * (1 - threshold). After a confirmation
only the opposite condition is armed, so events strictly alternate. The
interval after a confirmation and before the next one is the overshoot.

All functions are pure and operate independently per series, so feature maps
parallelise trivially across assets, channels and thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import AssetSeries, ObservationWindow
from .errors import ConfigError, NumericError

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class DcEvent:
    direction: str  # UP or DOWN
    confirm_index: int
    extreme_index: int  # preceding extreme (low for UP, high for DOWN)


@dataclass(frozen=True)
class DcFeatureMap:
    """Signed overshoot tensor, same N x M x T_w shape as the window it came from."""

    tensor: np.ndarray
    threshold: float


def _check_threshold(threshold: float) -> None:
    if not (0.0 < threshold < 1.0):
        raise ConfigError(f"DC threshold must lie in (0, 1), got {threshold}")


def _check_prices(prices: np.ndarray) -> None:
    if prices.ndim != 1 or len(prices) < 2:
        raise ConfigError("need a 1-D series of at least 2 prices")
    if np.any(prices <= 0) or not np.all(np.isfinite(prices)):
        raise NumericError("prices must be positive and finite")


def detect_events(prices: Sequence[float], threshold: float) -> list[DcEvent]:
    """Single-pass scan for confirmed directional-change events.

    Confirmation is inclusive (>= / <=). Extremes keep their first-occurrence
    index, and the extreme of the current trend starts at the confirmation
    price, which is provably the trend extreme up to that point.
    """
    prices = np.asarray(prices, dtype=np.float64)
    _check_threshold(threshold)
    _check_prices(prices)

    events: list[DcEvent] = []
    trend: str | None = None
    low = high = prices[0]
    low_i = high_i = 0
    for t in range(1, len(prices)):
        p = prices[t]
        if trend is None:
            if p >= low * (1.0 + threshold):
                events.append(DcEvent(UP, t, low_i))
                trend, high, high_i = UP, p, t
            elif p <= high * (1.0 - threshold):
                events.append(DcEvent(DOWN, t, high_i))
                trend, low, low_i = DOWN, p, t
            else:
                if p > high:
                    high, high_i = p, t
                if p < low:
                    low, low_i = p, t
        elif trend == UP:
            if p <= high * (1.0 - threshold):
                events.append(DcEvent(DOWN, t, high_i))
                trend, low, low_i = DOWN, p, t
            elif p > high:
                high, high_i = p, t
        else:
            if p >= low * (1.0 + threshold):
                events.append(DcEvent(UP, t, low_i))
                trend, high, high_i = UP, p, t
            elif p < low:
                low, low_i = p, t
    return events


def dc_transform(prices: Sequence[float], threshold: float) -> np.ndarray:
    """Signed relative overshoot from the most recent confirmation price.

    s_t = dir_t * (p_t - p_c) / p_c with dir_t = +1 in an upward trend,
    -1 in a downward trend and 0 before the first confirmation; by
    construction s is exactly 0 at every confirmation index.
    """
    prices = np.asarray(prices, dtype=np.float64)
    events = detect_events(prices, threshold)
    out = np.zeros(len(prices), dtype=np.float64)
    confirmations = {e.confirm_index: e for e in events}
    sign = 0.0
    p_c = math.nan
    for t in range(len(prices)):
        event = confirmations.get(t)
        if event is not None:
            sign = 1.0 if event.direction == UP else -1.0
            p_c = prices[t]
            continue  # overshoot resets to zero at confirmation
        if sign != 0.0:
            out[t] = sign * (prices[t] - p_c) / p_c
    return out


def dc_feature_map(window: ObservationWindow | np.ndarray,
                   threshold: float) -> DcFeatureMap:
    """Apply the overshoot transform to every asset/channel series of a window."""
    tensor = window.tensor if isinstance(window, ObservationWindow) else np.asarray(window)
    if tensor.ndim != 3:
        raise ConfigError(f"expected an N x M x T_w tensor, got shape {tensor.shape}")
    out = np.empty_like(tensor, dtype=np.float64)
    n, m, _ = tensor.shape
    for i in range(n):
        for j in range(m):
            out[i, j] = dc_transform(tensor[i, j], threshold)
    return DcFeatureMap(tensor=out, threshold=threshold)


def high_order_signal(features: DcFeatureMap | np.ndarray) -> np.ndarray:
    """First difference along time, h_t = s_t - s_{t-1} with h_0 = 0.

    Emphasises the instants where the overshoot jumps, i.e. where DC events
    fire or price moves sharply relative to the last confirmation.
    """
    tensor = features.tensor if isinstance(features, DcFeatureMap) else np.asarray(features)
    out = np.zeros_like(tensor, dtype=np.float64)
    out[..., 1:] = tensor[..., 1:] - tensor[..., :-1]
    return out


def time_mask(window_len: int) -> np.ndarray:
    """Chronology weights sin(t') with t' mapped linearly onto [0, pi/2].

    The first day of the window gets 0, the last day 1, strictly increasing
    in between: recent days matter most.
    """
    if window_len < 2:
        raise ConfigError("time mask needs window_len >= 2")
    k = np.arange(window_len, dtype=np.float64)
    return np.sin(k * (math.pi / 2.0) / (window_len - 1))


def event_rows(series: AssetSeries, threshold: float,
               channel: str = "close") -> list[dict[str, str]]:
    """Detected events of one asset as rows for the events CSV interface."""
    events = detect_events(series.channels[channel], threshold)
    return [
        {
            "asset_id": series.asset_id,
            "direction": e.direction,
            "confirm_date": series.dates[e.confirm_index].isoformat(),
            "extreme_date": series.dates[e.extreme_index].isoformat(),
            "threshold": repr(threshold),
        }
        for e in events
    ]
