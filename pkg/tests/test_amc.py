import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cogamc.amc import (
    AmcMode,
    AmcTable,
    InvalidModeError,
    NegativeThresholdError,
    ber_probability,
    check_threshold_convexity,
    default_table,
    snir_threshold,
    threshold_convexity_check,
)


def test_ber_at_zero_snr_is_amplitude():
    assert ber_probability(0.0, AmcMode(1, 1.0, 1.0, 1.0)) == 1.0


def test_ber_direct_substitution():
    assert ber_probability(math.log(1e5), AmcMode(1, 1.0, 1.0, 1.0)) == pytest.approx(1e-5, rel=1e-12)


def test_ber_outage_mode_rejected():
    with pytest.raises(InvalidModeError):
        ber_probability(5.0, AmcMode(0, 0.0))


def test_threshold_examples():
    assert snir_threshold(AmcMode(1, 1.0, 1.0, 1.0), math.exp(-2)) == pytest.approx(2.0)
    assert snir_threshold(AmcMode(1, 1.0, 0.5, 3.0), 0.5) == 0.0


def test_threshold_above_amplitude_rejected():
    # targets >= 1 are out of range before the amplitude check, so use a small amplitude
    with pytest.raises(NegativeThresholdError):
        snir_threshold(AmcMode(1, 1.0, 0.1, 1.0), 0.2)
    with pytest.raises(ValueError):
        snir_threshold(AmcMode(1, 1.0, 1.0, 1.0), 2.0)


def test_threshold_outage_mode_rejected():
    with pytest.raises(InvalidModeError):
        snir_threshold(AmcMode(0, 0.0), 1e-5)


def test_mode_invariants():
    with pytest.raises(ValueError):
        AmcMode(0, 1.0)
    with pytest.raises(ValueError):
        AmcMode(2, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        AmcTable.from_triples([(1.0, 0.2, 1.0), (1.0, 0.2, 0.5)])
    with pytest.raises(ValueError):
        AmcTable((AmcMode(0, 0.0),))


def test_convexity_examples():
    assert check_threshold_convexity([0, 1, 2, 3], [0, 1, 3, 7]).passed
    res = check_threshold_convexity([0, 1, 2, 3], [0, 1, 5, 6])
    assert not res.passed
    assert res.violation == (3, 1, 1)


@pytest.mark.parametrize("target", [1e-3, 1e-5, 1e-7])
def test_default_table_convex(target):
    assert threshold_convexity_check(default_table(), target).passed


def test_default_table_shape():
    t = default_table()
    assert t.n_modes == 7
    np.testing.assert_array_equal(t.rates, [0, 0.5, 0.75, 1, 1.5, 2, 3, 4])
    g_db = 10 * np.log10(t.thresholds(1e-5)[1:])
    np.testing.assert_allclose(g_db, [5, 7, 8.5, 11.5, 14, 18, 22], atol=1e-9)


@pytest.mark.parametrize("target", [1e-2, 1e-5, 1e-9])
def test_thresholds_strictly_increasing(target):
    g = default_table().thresholds(target)
    assert g[0] == 0.0
    assert np.all(np.diff(g[1:]) > 0)


def test_thresholds_memoized_and_isolated():
    t = default_table()
    a = t.thresholds(1e-5)
    a[1] = -1.0
    assert t.thresholds(1e-5)[1] > 0


@given(
    a=st.floats(1e-3, 1.0),
    slope=st.floats(1e-3, 1e3),
    frac=st.floats(1e-12, 1.0),
)
def test_round_trip(a, slope, frac):
    mode = AmcMode(1, 1.0, a, slope)
    target = a * frac
    if not 0 < target < 1:
        return
    g = snir_threshold(mode, target)
    assert ber_probability(g, mode) == pytest.approx(target, rel=1e-12)


def test_ber_decreasing_in_snr():
    mode = default_table().modes[3]
    vals = [ber_probability(x, mode) for x in np.linspace(0, 100, 200)]
    assert np.all(np.diff(vals) < 0)
