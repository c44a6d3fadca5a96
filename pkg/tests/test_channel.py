import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harvestopt import (
    Deterministic,
    DiscreteChannel,
    Exponential,
    discretize,
    sample,
)
from harvestopt.channel import TRUNCATION_QUANTILE


def test_explicit_channel_renormalizes():
    ch = DiscreteChannel(levels=[0.5, 1.5], probs=[1.0, 1.0])
    assert np.allclose(ch.probs, [0.5, 0.5])
    assert abs(ch.probs.sum() - 1.0) < 1e-12


@pytest.mark.parametrize(
    "levels,probs",
    [
        ([1.0, 2.0], [0.5]),  # length mismatch
        ([], []),  # empty
        ([0.0, 1.0], [0.5, 0.5]),  # nonpositive gain
        ([2.0, 1.0], [0.5, 0.5]),  # not increasing
        ([1.0, 1.0], [0.5, 0.5]),  # not strictly increasing
        ([1.0, 2.0], [-0.1, 1.1]),  # negative probability
        ([1.0, 2.0], [0.0, 0.0]),  # zero mass
    ],
)
def test_invalid_channels_rejected(levels, probs):
    with pytest.raises(ValueError):
        DiscreteChannel(levels=levels, probs=probs)


def test_deterministic_single_level():
    ch = discretize(Deterministic(1.0), 1)
    assert ch.levels.tolist() == [1.0]
    assert ch.probs.tolist() == [1.0]


def test_exponential_two_levels():
    # Closed-form CDF arithmetic: G_max = -ln(0.001), delta = G_max / 2,
    # q1 = 1 - e^(-delta), q2 = e^(-delta) - e^(-2 delta) plus the 0.001 tail.
    ch = discretize(Exponential(1.0), 2)
    g_max = -math.log(1 - TRUNCATION_QUANTILE)
    delta = g_max / 2
    q1 = 1 - math.exp(-delta)
    q2 = (math.exp(-delta) - math.exp(-2 * delta)) + (1 - TRUNCATION_QUANTILE)
    assert np.allclose(ch.levels, [delta / 2, 1.5 * delta], atol=1e-12)
    assert np.allclose(ch.probs, [q1, q2], atol=1e-12)
    # sanity pins on the actual numbers
    assert ch.probs[0] == pytest.approx(0.9684, abs=1e-4)
    assert ch.probs[1] == pytest.approx(0.0316, abs=1e-4)
    assert ch.levels[0] == pytest.approx(1.7270, abs=1e-4)
    assert ch.levels[1] == pytest.approx(5.1809, abs=1e-4)
    # cross-check the first bin's mass by midpoint-rule integration of the density
    h = delta / 200_000
    x = (np.arange(200_000) + 0.5) * h
    q1_num = float(np.exp(-x).sum() * h)
    assert q1 == pytest.approx(q1_num, rel=1e-6)


def test_exponential_twenty_levels_cdf_formula():
    ch = discretize(Exponential(1.0), 20)
    g_max = -math.log(1 - TRUNCATION_QUANTILE)
    delta = g_max / 20
    expected = np.array(
        [math.exp(-(n - 1) * delta) - math.exp(-n * delta) for n in range(1, 21)]
    )
    expected[-1] += 1 - TRUNCATION_QUANTILE
    assert abs(expected.sum() - 1.0) < 1e-12
    assert np.allclose(ch.probs, expected, atol=1e-12)
    assert np.allclose(ch.levels, (np.arange(20) + 0.5) * delta, atol=1e-12)


def test_mean_gain_error_shrinks_with_levels():
    errs = {
        n: abs(discretize(Exponential(1.0), n).mean_gain - 1.0) for n in (5, 20, 100)
    }
    assert errs[100] < errs[5]


@settings(max_examples=50, deadline=None)
@given(
    mean=st.floats(min_value=0.05, max_value=20.0),
    n=st.integers(min_value=1, max_value=64),
)
def test_discretize_invariants(mean, n):
    ch = discretize(Exponential(mean), n)
    assert ch.n_levels == n
    assert np.all(ch.levels > 0)
    assert np.all(np.diff(ch.levels) > 0)
    assert np.all(ch.probs >= 0)
    assert abs(ch.probs.sum() - 1.0) < 1e-12


def test_discretize_rejects_bad_inputs():
    with pytest.raises(ValueError):
        discretize(Exponential(1.0), 0)
    with pytest.raises(ValueError):
        Exponential(-1.0)
    with pytest.raises(ValueError):
        Deterministic(0.0)


def test_sampling_degenerate_channel():
    ch = DiscreteChannel(levels=[3.0], probs=[1.0])
    rng = np.random.default_rng(123)
    assert all(sample(ch, rng) == 0 for _ in range(100))


def test_sampling_frequency_two_levels():
    # binomial: 1e6 draws at p=0.5, 3 sigma is ~0.0015
    ch = DiscreteChannel(levels=[1.0, 2.0], probs=[0.5, 0.5])
    rng = np.random.default_rng(42)
    hits = sum(sample(ch, rng) == 0 for _ in range(1_000_000))
    assert 0.498 <= hits / 1_000_000 <= 0.502


def test_same_seed_same_draws():
    ch = discretize(Exponential(1.0), 8)
    a = np.random.default_rng(777)
    b = np.random.default_rng(777)
    assert [sample(ch, a) for _ in range(500)] == [sample(ch, b) for _ in range(500)]


def test_empirical_mean_matches_channel_mean():
    ch = discretize(Exponential(1.0), 20)
    rng = np.random.default_rng(5)
    draws = np.array([sample(ch, rng) for _ in range(1_000_000)])
    gains = ch.levels[draws]
    se = gains.std(ddof=1) / math.sqrt(len(gains))
    assert abs(gains.mean() - ch.mean_gain) < 3 * se


def test_json_round_trip():
    ch = discretize(Exponential(2.0), 6)
    back = DiscreteChannel.from_json(ch.to_json())
    assert np.array_equal(back.levels, ch.levels)
    assert np.array_equal(back.probs, ch.probs)
    obj = json.loads(ch.to_json())
    assert set(obj) == {"levels", "probs"}
