import numpy as np
import pytest

from cogamc.baselines import (
    interweave,
    interweave_adaptive_power,
    interweave_constant_power,
    primary_interweave_rate,
    single_link_power_adaptation,
    solve_activity_fraction,
)
from cogamc.fading import GainModel, GainStreams, sample_block_gains

MODEL = GainModel(1.0, 1.0, 0.03, 0.03, 0.05)


def test_activity_fraction_edges(table):
    assert solve_activity_fraction(MODEL, table, 1e-5, 1.0, 0.0) == 0.0
    full = primary_interweave_rate(1.0, MODEL, table, 1e-5, 1.0)
    assert solve_activity_fraction(MODEL, table, 1e-5, 1.0, full) == pytest.approx(1.0, abs=1e-8)
    assert solve_activity_fraction(MODEL, table, 1e-5, 1.0, 4.0) is None


def test_activity_fraction_equality_and_grid(table):
    lam = solve_activity_fraction(MODEL, table, 1e-5, 1.0, 1.2)
    assert primary_interweave_rate(lam, MODEL, table, 1e-5, 1.0) == pytest.approx(1.2, abs=1e-8)
    grid = np.linspace(0, 1, 1_000_001)
    mean = 1.0 / (grid[1:] * MODEL.noise_power)
    steps = np.diff(table.rates)
    v = table.thresholds(1e-5)[1:]
    rate = grid[1:] * (steps[None, :] * np.exp(-v[None, :] / mean[:, None])).sum(axis=1)
    first = grid[1:][np.argmax(rate >= 1.2)]
    assert lam == pytest.approx(first, abs=1e-6)


def test_constant_power_edges(table):
    assert interweave_constant_power(MODEL, table, 1e-5, 1.0, 2.0) == 0.0
    full = interweave_constant_power(MODEL, table, 1e-5, 0.0, 2.0)
    steps = np.diff(table.rates)
    v = table.thresholds(1e-5)[1:]
    assert full == pytest.approx(np.sum(steps * np.exp(-v * MODEL.noise_power / 2.0)))


def test_constant_power_monotone(table):
    lams = np.linspace(0, 1, 21)
    vals = [interweave_constant_power(MODEL, table, 1e-5, x, 2.0) for x in lams]
    assert np.all(np.diff(vals) <= 1e-12)
    budgets = np.linspace(0.1, 10, 21)
    vals = [interweave_constant_power(MODEL, table, 1e-5, 0.3, b) for b in budgets]
    assert np.all(np.diff(vals) >= -1e-12)


def test_constant_power_against_sampling(table):
    lam = 0.4
    gains = sample_block_gains(MODEL, GainStreams(11), 1_000_000)
    snr = 2.0 * gains.s22 / ((1 - lam) * MODEL.noise_power)
    v = table.thresholds(1e-5)
    rate = (1 - lam) * table.rates[np.searchsorted(v[1:], snr, side="right")]
    se = rate.std(ddof=1) / np.sqrt(rate.size)
    assert abs(rate.mean() - interweave_constant_power(MODEL, table, 1e-5, lam, 2.0)) <= 3 * se


def test_adaptive_unconstrained_limit(table):
    k2, _ = interweave_adaptive_power(MODEL, table, 1e-5, 0.3, 1e12)
    assert k2 == pytest.approx(0.7 * 4.0, rel=1e-6)


def test_adaptive_slackness_and_order(table):
    mean_x = 1.0 / MODEL.noise_power
    res = single_link_power_adaptation(table.rates, table.thresholds(1e-5), mean_x, 1.5)
    assert res.average_power <= 1.5 * (1 + 1e-9)
    assert abs(res.average_power - 1.5) < 1e-6
    finite = res.thresholds[np.isfinite(res.thresholds)]
    assert np.all(np.diff(finite) > 0)


def test_adaptive_power_by_sampling(table):
    mean_x = 1.0 / MODEL.noise_power
    g = table.thresholds(1e-5)
    res = single_link_power_adaptation(table.rates, g, mean_x, 1.5)
    x = np.random.default_rng(4).exponential(mean_x, 1_000_000)
    v = np.concatenate(([0.0], res.thresholds))
    mode = np.zeros(x.size, dtype=int)
    for n in range(1, v.size):
        mode = np.where(x >= v[n], n, mode)
    rate = table.rates[mode]
    power = np.where(mode > 0, g[mode] / x, 0.0)
    assert abs(rate.mean() - res.average_rate) <= 3 * rate.std() / 1e3
    assert abs(power.mean() - res.average_power) <= 3 * power.std() / 1e3


@pytest.mark.parametrize("lam", [0.0, 0.2, 0.5, 0.8])
@pytest.mark.parametrize("budget", [0.2, 2.0, 8.0])
def test_adaptive_beats_constant(table, lam, budget):
    k_const = interweave_constant_power(MODEL, table, 1e-5, lam, budget)
    k_adapt, _ = interweave_adaptive_power(MODEL, table, 1e-5, lam, budget)
    assert k_adapt >= k_const - 1e-9


def test_tiny_budget_returns_zero(table):
    k2, thr = interweave_adaptive_power(GainModel(1, 1, 1, 1, 1e6), table, 1e-5, 0.0, 1e-300)
    assert k2 == 0.0 and thr.size == 0


def test_interweave_bundle(table):
    res = interweave(MODEL, table, 1e-5, 1e-5, 1.0, 0.8, 2.0, adaptive=True)
    assert res.scheme == "interweave-adaptive"
    assert 0 < res.activity_fraction < 1
    assert res.primary_rate == pytest.approx(0.8, abs=1e-8)
    assert interweave(MODEL, table, 1e-5, 1e-5, 1.0, 4.0, 2.0, adaptive=False) is None
