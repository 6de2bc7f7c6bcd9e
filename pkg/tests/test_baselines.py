"""Simplex projection and the CRP / EG / PAMR update rules."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from masaat.backtest import run_backtest
from masaat.baselines import (CRP, EG, PAMR, eg_update, make_baseline,
                              pamr_update, project_simplex, uniform_weights)
from masaat.data import synthesize
from masaat.errors import ConfigError


def grid_oracle(v, resolution=1e-3):
    """Dense search over the simplex for the closest point to v (N <= 3)."""
    v = np.asarray(v, dtype=np.float64)
    ticks = np.arange(0.0, 1.0 + resolution / 2, resolution)
    if v.size == 2:
        candidates = np.stack([ticks, 1.0 - ticks], axis=1)
    elif v.size == 3:
        a, b = np.meshgrid(ticks, ticks, indexing="ij")
        keep = a + b <= 1.0 + 1e-12
        candidates = np.stack([a[keep], b[keep], 1.0 - a[keep] - b[keep]], axis=1)
    else:
        raise ValueError("oracle supports N <= 3")
    distances = ((candidates - v) ** 2).sum(axis=1)
    return candidates[int(np.argmin(distances))]


# ----------------------------------------------------------------------
# project_simplex


def test_projection_of_simplex_point_is_itself():
    w = np.array([0.2, 0.5, 0.3])
    assert np.allclose(project_simplex(w), w, atol=1e-15)


def test_projection_worked_examples():
    assert np.allclose(project_simplex(np.array([2.0, 2.0])), [0.5, 0.5],
                       atol=1e-15)
    assert np.allclose(project_simplex(np.array([1.2, -0.2])), [1.0, 0.0],
                       atol=1e-15)


def test_projection_matches_grid_oracle():
    rng = np.random.default_rng(41)
    for n in (2, 3):
        for _ in range(25):
            v = rng.uniform(-2.0, 2.0, size=n)
            exact = project_simplex(v)
            approx = grid_oracle(v)
            assert np.linalg.norm(exact - approx) < 2e-3


@given(arrays(np.float64, st.integers(min_value=1, max_value=8),
              elements=st.floats(min_value=-50, max_value=50,
                                 allow_nan=False, allow_infinity=False)))
@settings(max_examples=100, deadline=None)
def test_projection_always_lands_on_the_simplex(v):
    w = project_simplex(v)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) < 1e-12


def test_projection_optimality_via_kkt():
    # the projection is the unique minimiser, so no feasible direction
    # improves the distance: check against random simplex points
    rng = np.random.default_rng(42)
    for _ in range(20):
        v = rng.uniform(-1.5, 1.5, size=4)
        w = project_simplex(v)
        best = ((w - v) ** 2).sum()
        for _ in range(200):
            z = rng.dirichlet(np.ones(4))
            assert ((z - v) ** 2).sum() >= best - 1e-12


# ----------------------------------------------------------------------
# EG


def test_eg_zero_eta_is_identity():
    w = np.array([0.3, 0.7])
    assert np.array_equal(eg_update(w, np.array([1.3, 0.7]), 0.0), w)


def test_eg_uniform_relatives_change_nothing():
    w = np.array([0.25, 0.35, 0.4])
    assert np.allclose(eg_update(w, np.ones(3), 0.05), w, atol=1e-15)


def test_eg_worked_example():
    w = eg_update(np.array([0.5, 0.5]), np.array([1.1, 0.9]), 0.05)
    # independent arithmetic: multipliers e^0.055 and e^0.045
    expected0 = math.exp(0.055) / (math.exp(0.055) + math.exp(0.045))
    assert w[0] == pytest.approx(expected0, abs=1e-15)
    assert np.allclose(w, [0.50250, 0.49750], atol=5e-6)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)


def test_eg_converges_to_crp_linearly_in_eta():
    rng = np.random.default_rng(43)
    w = rng.dirichlet(np.ones(4))
    x = rng.uniform(0.8, 1.2, size=4)
    deltas = [np.abs(eg_update(w, x, eta) - w).max()
              for eta in (1e-2, 1e-3, 1e-4)]
    assert deltas[0] > deltas[1] > deltas[2]
    assert deltas[1] == pytest.approx(deltas[0] / 10.0, rel=0.15)
    assert deltas[2] == pytest.approx(deltas[1] / 10.0, rel=0.15)


# ----------------------------------------------------------------------
# PAMR


def test_pamr_passive_when_loss_is_zero():
    w = np.array([0.5, 0.5])
    x = np.array([0.6, 0.2])  # w . x = 0.4 <= eps
    assert np.array_equal(pamr_update(w, x, 0.5), w)


def test_pamr_uniform_relatives_guarded():
    w = np.array([0.4, 0.6])
    assert np.array_equal(pamr_update(w, np.array([1.2, 1.2]), 0.5), w)


def test_pamr_worked_example():
    w = pamr_update(np.array([0.5, 0.5]), np.array([1.2, 0.8]), 0.5)
    # tau = 0.5 / 0.08 = 6.25; raw step [-0.75, 1.75] projects to [0, 1]
    assert np.allclose(w, [0.0, 1.0], atol=1e-12)


def test_pamr_unclipped_steps_hit_the_epsilon_boundary():
    rng = np.random.default_rng(44)
    checked = 0
    for _ in range(200):
        w = rng.dirichlet(np.ones(4))
        x = rng.uniform(0.9, 1.3, size=4)
        eps = 0.98
        raw = None
        loss = max(0.0, float(w @ x) - eps)
        centered = x - x.mean()
        denom = float(centered @ centered)
        if loss > 0 and denom > 0:
            raw = w - (loss / denom) * centered
        updated = pamr_update(w, x, eps)
        if raw is not None and np.all(raw >= 0):  # projection was a no-op
            checked += 1
            assert float(updated @ x) <= eps + 1e-9
    assert checked > 10


def test_pamr_output_is_always_feasible():
    rng = np.random.default_rng(45)
    for _ in range(100):
        w = rng.dirichlet(np.ones(5))
        x = rng.uniform(0.5, 1.5, size=5)
        updated = pamr_update(w, x, 0.5)
        assert np.all(updated >= 0)
        assert abs(updated.sum() - 1.0) < 1e-12


# ----------------------------------------------------------------------
# strategy wrappers


def test_crp_weights_constant_over_a_backtest():
    frame = synthesize([0.001, -0.001, 0.0], [0.02, 0.02, 0.02], days=50, seed=46)
    report = run_backtest(frame, CRP(), (1, 49))
    assert np.all(report.weights == 1.0 / 3.0)


def test_crp_validates_weights():
    with pytest.raises(ConfigError):
        CRP(np.array([0.6, 0.6]))


def test_crp_rebalancing_differs_from_buy_and_hold():
    frame = synthesize([0.0, 0.0], [0.05, 0.05], days=120, seed=47)
    report = run_backtest(frame, CRP(), (1, 119))
    closes = frame.closes()
    buy_hold = 0.5 * (closes[0, 1:] / closes[0, 0]) + \
        0.5 * (closes[1, 1:] / closes[1, 0])
    assert np.abs(report.values - buy_hold).max() > 1e-3


def test_eg_and_pamr_stay_on_simplex_through_a_backtest():
    frame = synthesize([0.002, -0.002, 0.0], [0.03, 0.03, 0.03], days=80, seed=48)
    for strategy in (EG(), PAMR()):
        report = run_backtest(frame, strategy, (1, 79))
        assert np.all(report.weights >= -1e-12)
        assert np.abs(report.weights.sum(axis=1) - 1.0).max() < 1e-12


def test_eg_first_decision_is_uniform():
    frame = synthesize([0.01, -0.01], [0.02, 0.02], days=30, seed=49)
    strategy = EG()
    strategy.start(frame, 5)
    assert np.allclose(strategy.decide(frame, 5), uniform_weights(2), atol=1e-15)
    later = strategy.decide(frame, 6)
    assert not np.allclose(later, uniform_weights(2))


def test_make_baseline_factory():
    assert isinstance(make_baseline("crp"), CRP)
    assert isinstance(make_baseline("EG"), EG)
    assert isinstance(make_baseline("pamr"), PAMR)
    with pytest.raises(ConfigError):
        make_baseline("momentum")
