"""Accounting model, metric formulas and the daily simulation harness."""

import math
from datetime import date

import numpy as np
import pytest

from masaat.backtest import (BacktestState, MetricConfig, PolicyStrategy,
                             annualised_return, max_drawdown, run_backtest,
                             sharpe_ratio, step)
from masaat.baselines import CRP
from masaat.data import AssetSeries, MarketFrame, align, synthesize
from masaat.errors import AccountingError, RangeError, ZeroVolatilityError
from masaat.model import AgentSpec, MasaatPolicy
from masaat.nn import EncoderConfig


def frame_from_closes(closes_per_asset):
    """Build a frame whose every channel equals the given close paths."""
    n_days = len(closes_per_asset[0])
    dates = tuple(date.fromordinal(date(2021, 1, 4).toordinal() + i)
                  for i in range(n_days))
    assets = []
    for i, closes in enumerate(closes_per_asset):
        closes = np.asarray(closes, dtype=np.float64)
        assets.append(AssetSeries(
            asset_id=f"A{i}", dates=dates,
            channels={c: closes.copy() for c in ("open", "high", "low", "close")}))
    return MarketFrame(assets=tuple(assets), calendar=dates)


def all_pairs_drawdown(curve):
    """O(T^2) oracle: max over t1 < t2 of (C_t1 - C_t2) / C_t1, in percent."""
    curve = np.asarray(curve, dtype=np.float64)
    diff = (curve[:, None] - curve[None, :]) / curve[:, None]
    return max(0.0, float(np.triu(diff, k=1).max())) * 100.0


# ----------------------------------------------------------------------
# step


def test_step_offsetting_moves_leave_value_unchanged():
    state = BacktestState()
    state, rec = step(state, [0.5, 0.5], [1.1, 0.9])
    assert rec.gross == pytest.approx(1.0, abs=1e-15)
    assert state.value == pytest.approx(1.0, abs=1e-15)


def test_step_flat_market_is_flat_without_costs():
    state = BacktestState()
    for _ in range(5):
        state, rec = step(state, [0.3, 0.7], [1.0, 1.0])
        assert rec.gross == 1.0
    assert state.value == 1.0


def test_step_first_day_turnover_is_free():
    cfg = MetricConfig(transaction_cost=0.001)
    state, rec = step(BacktestState(), [0.25, 0.75], [1.2, 0.8], cfg)
    assert rec.gross == pytest.approx(0.25 * 1.2 + 0.75 * 0.8, abs=1e-15)


def test_step_charges_turnover_against_drifted_weights():
    cfg = MetricConfig(transaction_cost=0.01)
    state, _ = step(BacktestState(), [0.5, 0.5], [1.2, 0.8], cfg)
    drifted = np.array([0.6, 0.4])  # [0.5*1.2, 0.5*0.8] / 1.0
    assert np.allclose(state.drifted_weights, drifted, atol=1e-15)
    new_w = np.array([0.5, 0.5])
    turnover = np.abs(new_w - drifted).sum()
    state2, rec = step(state, new_w, [1.0, 1.0], cfg)
    assert rec.gross == pytest.approx(1.0 * (1 - 0.01 * turnover), abs=1e-15)


def test_step_rejects_catastrophic_costs_and_bad_weights():
    cfg = MetricConfig(transaction_cost=0.9)
    state, _ = step(BacktestState(), [1.0, 0.0], [1.0, 1.0], cfg)
    with pytest.raises(AccountingError):
        step(state, [0.0, 1.0], [1.0, 1.0], cfg)  # turnover 2, 1 - 1.8 < 0
    with pytest.raises(ValueError):
        step(BacktestState(), [0.6, 0.6], [1.0, 1.0])
    with pytest.raises(AccountingError):
        step(BacktestState(), [0.5, 0.5], [1.0, -0.2])


# ----------------------------------------------------------------------
# annualised return


def test_annualised_return_flat():
    assert annualised_return(1.0, 1.0, 500) == 0.0


def test_annualised_return_half_year_exponent():
    # 21% over two years compounds to 10% a year
    assert annualised_return(1.0, 1.21, 504, 252) == pytest.approx(10.0, abs=1e-9)


def test_annualised_return_one_year_identity():
    # with T == T_yr the formula reduces to the plain percent gain
    assert annualised_return(1.0, 1.1428, 252, 252) == pytest.approx(14.28, abs=1e-10)


def test_annualised_return_preconditions():
    with pytest.raises(ValueError):
        annualised_return(0.0, 1.0, 10)
    with pytest.raises(ValueError):
        annualised_return(1.0, 1.0, 0)


# ----------------------------------------------------------------------
# max drawdown


def test_drawdown_monotone_curve_is_zero():
    assert max_drawdown([1.0, 1.1, 1.2, 1.5]) == 0.0


def test_drawdown_worked_examples():
    assert max_drawdown([1.0, 1.2, 0.9, 1.1, 0.8]) == pytest.approx(100.0 / 3.0,
                                                                    abs=1e-12)
    assert max_drawdown([1.0, 0.5, 1.0]) == pytest.approx(50.0, abs=1e-12)


def test_drawdown_matches_all_pairs_oracle():
    rng = np.random.default_rng(23)
    for _ in range(100):
        curve = np.exp(np.cumsum(rng.standard_normal(80) * 0.03))
        assert max_drawdown(curve) == all_pairs_drawdown(curve)


def test_drawdown_scale_invariance():
    rng = np.random.default_rng(24)
    curve = np.exp(np.cumsum(rng.standard_normal(60) * 0.02))
    assert max_drawdown(curve) == pytest.approx(max_drawdown(curve * 137.0),
                                                abs=1e-12)


# ----------------------------------------------------------------------
# sharpe ratio


def test_sharpe_zero_excess_return():
    assert sharpe_ratio(0.03, 0.03, [0.01, -0.02, 0.005]) == 0.0


def test_sharpe_worked_example():
    # independent high-precision evaluation of the formula:
    # r = [0.01, 0.03], mean 0.02, sum of squared deviations 2e-4,
    # sigma = sqrt(252 / 1 * 2e-4), SR = 0.1 / sigma
    sigma = math.sqrt(252.0 * math.fsum([(0.01 - 0.02) ** 2, (0.03 - 0.02) ** 2]))
    expected = 0.1 / sigma
    assert sharpe_ratio(0.10, 0.0, [0.01, 0.03], 252) == pytest.approx(
        expected, abs=1e-15)
    assert expected == pytest.approx(0.44543540318737396, abs=1e-12)


def test_sharpe_undefined_for_constant_returns():
    with pytest.raises(ZeroVolatilityError):
        sharpe_ratio(0.05, 0.0, [0.01, 0.01, 0.01])
    with pytest.raises(ValueError):
        sharpe_ratio(0.05, 0.0, [0.01])


# ----------------------------------------------------------------------
# run_backtest


def test_crp_on_offsetting_alternation_is_flat():
    ratios0 = [1.1, 0.9] * 10
    ratios1 = [0.9, 1.1] * 10
    closes0 = 100.0 * np.cumprod([1.0] + ratios0)
    closes1 = 100.0 * np.cumprod([1.0] + ratios1)
    frame = frame_from_closes([closes0, closes1])
    report = run_backtest(frame, CRP(), (1, frame.n_days - 1))
    assert np.abs(report.gross_returns - 1.0).max() < 1e-12
    assert abs(report.ar_pct) < 1e-9


def test_all_in_constant_growth_matches_compounding_identity():
    g = 1.001
    days = 253  # one leading day plus T_yr tradable days
    closes0 = 100.0 * g ** np.arange(days)
    closes1 = np.full(days, 50.0)
    frame = frame_from_closes([closes0, closes1])
    report = run_backtest(frame, CRP(np.array([1.0, 0.0])), (1, days - 1))
    expected = (g ** 252 - 1.0) * 100.0
    assert report.ar_pct == pytest.approx(expected, rel=1e-9)


def test_single_asset_equity_follows_its_normalised_closes():
    frame = synthesize([0.001, 0.0], [0.02, 0.01], days=40, seed=31)
    report = run_backtest(frame, CRP(np.array([1.0, 0.0])), (1, 39))
    closes = frame.assets[0].channels["close"]
    assert np.allclose(report.values, closes[1:] / closes[0], atol=1e-12)


def test_equity_identity():
    frame = synthesize([0.0005, -0.0005, 0.0], [0.02, 0.015, 0.01],
                       days=120, seed=32)
    report = run_backtest(frame, CRP(), (1, 119))
    assert report.final_value == pytest.approx(
        float(np.prod(report.gross_returns)), rel=1e-12)
    assert report.mdd_pct == pytest.approx(all_pairs_drawdown(report.curve),
                                           abs=1e-12)


def test_range_validation():
    frame = synthesize([0.0, 0.0], [0.01, 0.01], days=30, seed=33)
    with pytest.raises(RangeError):
        run_backtest(frame, CRP(), (5, 4))
    with pytest.raises(RangeError):
        run_backtest(frame, CRP(), (0, 10))
    with pytest.raises(RangeError):
        run_backtest(frame, CRP(), (1, 30))


def test_flat_market_report_has_no_sharpe():
    frame = synthesize([0.0, 0.0], [0.0, 0.0], days=20, seed=34)
    report = run_backtest(frame, CRP(), (1, 19))
    assert report.sharpe is None
    assert report.ar_pct == 0.0


def test_no_look_ahead_for_policy_strategy():
    frame = synthesize([0.001, -0.001, 0.0], [0.02, 0.02, 0.02],
                       days=60, seed=35)
    policy = MasaatPolicy(3, 4, 6, [AgentSpec("dc", 0.01), AgentSpec("raw_price")],
                          encoder=EncoderConfig(embed_dim=4, num_heads=2,
                                                num_layers=1), seed=1)
    span = (10, 40)
    base = run_backtest(frame, PolicyStrategy(policy), span)

    tamper_day = 25
    assets = []
    for i, asset in enumerate(frame.assets):
        channels = {k: v.copy() for k, v in asset.channels.items()}
        if i == 0:
            for v in channels.values():
                v[tamper_day:] *= 3.0  # rewrite the future only
        assets.append(AssetSeries(asset_id=asset.asset_id, dates=asset.dates,
                                  channels=channels))
    tampered = MarketFrame(assets=tuple(assets), calendar=frame.calendar)
    other = run_backtest(tampered, PolicyStrategy(policy), span)

    # weights for every day up to and including the tamper day are unchanged
    changed_from = tamper_day - span[0] + 1
    assert np.array_equal(base.weights[:changed_from], other.weights[:changed_from])
    assert not np.allclose(base.weights[changed_from + 1:],
                           other.weights[changed_from + 1:])


def test_report_files_round_trip(tmp_path):
    frame = synthesize([0.001, 0.0], [0.02, 0.01], days=30, seed=36)
    report = run_backtest(frame, CRP(), (1, 29))
    report.write_json(tmp_path / "report.json")
    report.write_equity_csv(tmp_path / "equity.csv")
    import csv as csv_mod
    import json
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["ar_pct"] == report.ar_pct
    assert doc["final_value"] == report.final_value
    with (tmp_path / "equity.csv").open() as fh:
        rows = list(csv_mod.DictReader(fh))
    assert list(rows[0]) == ["date", "value", "return"]
    assert len(rows) == len(report.values)
    assert float(rows[-1]["value"]) == report.final_value
