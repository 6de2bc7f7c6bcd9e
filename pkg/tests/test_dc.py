"""Directional-change detection against an independent brute-force oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masaat.dc import (DcFeatureMap, dc_feature_map, dc_transform,
                       detect_events, event_rows, high_order_signal, time_mask)
from masaat.data import synthesize
from masaat.errors import ConfigError, NumericError

WORKED_PRICES = [100.0, 105.0, 111.0, 100.0, 98.0]


def brute_force_events(prices, threshold):
    """O(T^2) oracle: re-derive the relevant extremes from scratch each step."""
    prices = np.asarray(prices, dtype=np.float64)
    events = []
    trend = None
    anchor = 0  # confirmation index that opened the current trend
    for t in range(1, len(prices)):
        p = prices[t]
        if trend is None:
            prefix = prices[:t]
            low, low_i = prefix.min(), int(prefix.argmin())
            high, high_i = prefix.max(), int(prefix.argmax())
            if p >= low * (1.0 + threshold):
                events.append(("up", t, low_i))
                trend, anchor = "up", t
            elif p <= high * (1.0 - threshold):
                events.append(("down", t, high_i))
                trend, anchor = "down", t
        elif trend == "up":
            segment = prices[anchor:t]
            high, high_i = segment.max(), anchor + int(segment.argmax())
            if p <= high * (1.0 - threshold):
                events.append(("down", t, high_i))
                trend, anchor = "down", t
        else:
            segment = prices[anchor:t]
            low, low_i = segment.min(), anchor + int(segment.argmin())
            if p >= low * (1.0 + threshold):
                events.append(("up", t, low_i))
                trend, anchor = "up", t
    return events


def as_tuples(events):
    return [(e.direction, e.confirm_index, e.extreme_index) for e in events]


# ----------------------------------------------------------------------
# detect_events


def test_worked_example():
    assert as_tuples(detect_events(WORKED_PRICES, 0.10)) == [
        ("up", 2, 0), ("down", 4, 2)]


def test_constant_series_has_no_events():
    assert detect_events([50.0] * 10, 0.01) == []


def test_monotone_series_confirms_once_at_first_crossing():
    prices = np.linspace(100.0, 112.0, 13)  # one unit per day, crosses +10%
    events = as_tuples(detect_events(prices, 0.10))
    assert events == brute_force_events(prices, 0.10)
    assert len(events) == 1
    direction, confirm, extreme = events[0]
    assert direction == "up" and extreme == 0
    assert prices[confirm] >= 100.0 * 1.10
    assert prices[confirm - 1] < 100.0 * 1.10


def test_matches_brute_force_oracle_on_random_walks():
    rng = np.random.default_rng(42)
    for _ in range(100):
        prices = 100.0 * np.exp(np.cumsum(rng.standard_normal(120) * 0.01))
        for threshold in (0.005, 0.01, 0.02):
            fast = as_tuples(detect_events(prices, threshold))
            assert fast == brute_force_events(prices, threshold)


def test_events_alternate():
    rng = np.random.default_rng(7)
    prices = 100.0 * np.exp(np.cumsum(rng.standard_normal(500) * 0.02))
    events = detect_events(prices, 0.01)
    assert len(events) > 2
    for first, second in zip(events, events[1:]):
        assert first.direction != second.direction


@given(st.floats(min_value=1e-6, max_value=1e6,
                 allow_nan=False, allow_infinity=False))
@settings(max_examples=50, deadline=None)
def test_scale_invariance(scale):
    rng = np.random.default_rng(11)
    prices = 100.0 * np.exp(np.cumsum(rng.standard_normal(200) * 0.015))
    base = as_tuples(detect_events(prices, 0.01))
    scaled = as_tuples(detect_events(prices * scale, 0.01))
    assert base == scaled


def test_event_count_non_increasing_in_threshold():
    rng = np.random.default_rng(13)
    for _ in range(20):
        prices = 100.0 * np.exp(np.cumsum(rng.standard_normal(300) * 0.02))
        counts = [len(detect_events(prices, th))
                  for th in (0.002, 0.005, 0.01, 0.02, 0.05, 0.1)]
        assert counts == sorted(counts, reverse=True)


def test_rejects_bad_input():
    with pytest.raises(NumericError):
        detect_events([100.0, -1.0], 0.01)
    with pytest.raises(ConfigError):
        detect_events([100.0, 101.0], 1.5)
    with pytest.raises(ConfigError):
        detect_events([100.0], 0.01)


# ----------------------------------------------------------------------
# dc_transform


def test_transform_worked_example():
    out = dc_transform(WORKED_PRICES, 0.10)
    expected = np.array([0.0, 0.0, 0.0, (100.0 - 111.0) / 111.0, 0.0])
    assert np.allclose(out, expected, atol=1e-15)


def test_transform_constant_series_is_zero():
    assert np.all(dc_transform([42.0] * 8, 0.05) == 0.0)


def test_transform_zero_at_every_confirmation():
    rng = np.random.default_rng(17)
    for _ in range(20):
        prices = 100.0 * np.exp(np.cumsum(rng.standard_normal(200) * 0.02))
        out = dc_transform(prices, 0.01)
        for event in detect_events(prices, 0.01):
            assert out[event.confirm_index] == 0.0


def test_transform_zero_before_first_confirmation():
    rng = np.random.default_rng(19)
    prices = 100.0 * np.exp(np.cumsum(rng.standard_normal(100) * 0.01))
    events = detect_events(prices, 0.02)
    out = dc_transform(prices, 0.02)
    first = events[0].confirm_index if events else len(prices)
    assert np.all(out[:first] == 0.0)


# ----------------------------------------------------------------------
# dc_feature_map


def test_feature_map_of_constant_window_is_zero():
    window = np.full((3, 2, 6), 5.0)
    fmap = dc_feature_map(window, 0.01)
    assert isinstance(fmap, DcFeatureMap)
    assert fmap.tensor.shape == window.shape
    assert np.all(fmap.tensor == 0.0)


def test_feature_map_locality():
    window = np.full((2, 2, 5), 100.0)
    window[0, 1, :] = WORKED_PRICES  # only asset 0, channel 1 moves
    fmap = dc_feature_map(window, 0.10).tensor
    assert np.all(fmap[1] == 0.0)
    assert np.all(fmap[0, 0] == 0.0)
    assert np.any(fmap[0, 1] != 0.0)


def test_feature_map_composes_per_series():
    other = [100.0, 104.0, 93.0, 95.0, 99.0]
    window = np.stack([[WORKED_PRICES], [other]])  # N=2, M=1, T=5
    fmap = dc_feature_map(window, 0.10).tensor
    assert np.allclose(fmap[0, 0], dc_transform(WORKED_PRICES, 0.10), atol=1e-15)
    assert np.allclose(fmap[1, 0], dc_transform(other, 0.10), atol=1e-15)


# ----------------------------------------------------------------------
# high-order signal


def test_high_order_of_zero_map_is_zero():
    assert np.all(high_order_signal(np.zeros((2, 2, 4))) == 0.0)


def test_high_order_of_worked_example():
    s = dc_transform(WORKED_PRICES, 0.10).reshape(1, 1, 5)
    h = high_order_signal(s)
    overshoot = (100.0 - 111.0) / 111.0
    assert np.allclose(h[0, 0], [0.0, 0.0, 0.0, overshoot, -overshoot], atol=1e-15)


def test_high_order_of_constant_slice_is_zero_after_first():
    s = np.full((1, 1, 6), 0.3)
    h = high_order_signal(s)
    assert np.all(h[..., 1:] == 0.0) and np.all(h[..., 0] == 0.0)


# ----------------------------------------------------------------------
# time mask


def test_time_mask_endpoints_and_values():
    assert np.allclose(time_mask(2), [0.0, 1.0], atol=1e-15)
    assert np.allclose(time_mask(3), [0.0, np.sin(np.pi / 4.0), 1.0], atol=1e-15)


@pytest.mark.parametrize("window_len", [2, 3, 5, 17, 64])
def test_time_mask_strictly_increasing(window_len):
    mask = time_mask(window_len)
    assert mask[0] == 0.0 and mask[-1] == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(mask) > 0)


def test_time_mask_rejects_short_windows():
    with pytest.raises(ConfigError):
        time_mask(1)


# ----------------------------------------------------------------------
# events CSV rows


def test_event_rows_schema():
    frame = synthesize([0.0, 0.0], [0.03, 0.0], days=60, seed=5)
    rows = event_rows(frame.assets[0], 0.01)
    assert rows, "volatile series should produce events"
    assert list(rows[0]) == ["asset_id", "direction", "confirm_date",
                             "extreme_date", "threshold"]
    events = detect_events(frame.assets[0].channels["close"], 0.01)
    assert len(rows) == len(events)
    assert rows[0]["confirm_date"] == frame.assets[0].dates[
        events[0].confirm_index].isoformat()
