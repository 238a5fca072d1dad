import numpy as np
import pytest
from scipy import integrate, stats

from ksoscp.datasets import (CASES, Dataset, generate_case, mean_function, noise_scale,
                             oracle_band, rng_stream, sample_x, sample_y)


@pytest.mark.parametrize("case", CASES)
def test_generate_is_deterministic(case):
    a = generate_case(case, 50, seed=7)
    b = generate_case(case, 50, seed=7)
    assert a.X.tobytes() == b.X.tobytes() and a.Y.tobytes() == b.Y.tobytes()
    assert a.meta == b.meta
    c = generate_case(case, 50, seed=8)
    assert not np.array_equal(a.Y, c.Y)


def test_streams_are_independent():
    a = generate_case(1, 20, seed=0, stream="train")
    b = generate_case(1, 20, seed=0, stream="calib")
    assert not np.array_equal(a.X, b.X)
    x1 = rng_stream(3, "folds").random(5)
    rng_stream(3, "other").random(100)
    np.testing.assert_array_equal(rng_stream(3, "folds").random(5), x1)


def test_case2_at_zero_is_exactly_zero():
    rng = np.random.default_rng(0)
    assert sample_y(2, np.zeros((3, 1)), rng).tolist() == [0.0, 0.0, 0.0]


def test_case4_at_zero():
    assert mean_function(4, [[0.0]])[0] == 0.0
    assert noise_scale(4, [[0.0]])[0] == 1.0


def test_case1_linear_branch():
    assert mean_function(1, [[0.97]])[0] == pytest.approx(0.07, abs=1e-15)


def test_case1_smooth_branch_and_scale():
    x = 0.1
    expected = np.sin(np.pi * (2 * x + 0.2)) + 0.2 * np.cos(4 * np.pi * (2 * x + 0.2))
    assert mean_function(1, [[x]])[0] == pytest.approx(expected, rel=1e-15)
    assert noise_scale(1, [[x]])[0] == pytest.approx(np.sqrt(0.1 + 2 * x * x), rel=1e-15)


def test_case3_and_case5_formulas():
    x = np.array([[0.3, -1.2]])
    assert noise_scale(3, x)[0] == pytest.approx(
        4 / 3 * (stats.norm.pdf(0.2) + stats.norm.pdf(-0.8)), rel=1e-14)
    assert mean_function(5, [[0.25]])[0] == pytest.approx(np.sin(0.5), rel=1e-15)
    assert noise_scale(5, [[0.25]])[0] == 1.0


def test_case4_five_dimensional_beta():
    x = np.full((1, 5), 0.5)
    t = 0.5 * 1.4
    assert mean_function(4, x)[0] == pytest.approx(2 * np.sin(np.pi * t) + np.pi * t)
    assert generate_case(4, 3, d=5).meta["beta"] == [1.0, 0.1, 0.1, 0.1, 0.1]


def test_input_domains():
    rng = np.random.default_rng(0)
    assert np.all(np.abs(sample_x(1, 500, 1, rng)) <= 1)
    X4 = sample_x(4, 500, 5, rng)
    assert X4.shape == (500, 5) and X4.min() >= 0 and X4.max() <= 1
    # exponential noise: standardized residuals are non-negative
    Y5 = generate_case(5, 2000, seed=1)
    eps = (Y5.Y - mean_function(5, Y5.X)) / noise_scale(5, Y5.X)
    assert eps.min() >= 0


def test_case2_scale_moment():
    exact, _ = integrate.quad(lambda x: abs(np.sin(x)) * stats.norm.pdf(x),
                              -np.inf, np.inf, limit=200)
    X = sample_x(2, 100_000, 1, rng_stream(0, "moments"))
    assert noise_scale(2, X).mean() == pytest.approx(exact, rel=0.01)


@pytest.mark.parametrize("case, d", [(1, 2), (5, 3), (9, 1)])
def test_unsupported_cases(case, d):
    with pytest.raises(ValueError):
        generate_case(case, 10, d=d)


def test_oracle_band_case4():
    lo, hi = oracle_band(4, [[0.0]], 0.1)
    assert hi[0] == pytest.approx(1.6449, abs=1e-4)
    assert lo[0] == -hi[0]


def test_oracle_band_zero_scale():
    lo, hi = oracle_band(2, np.zeros((2, 1)), 0.1)
    np.testing.assert_array_equal(lo, hi)


def test_oracle_band_case5_equal_tails():
    x = np.array([[0.4]])
    lo, hi = oracle_band(5, x, 0.1)
    m, s = mean_function(5, x)[0], noise_scale(5, x)[0]
    assert stats.expon.cdf((lo[0] - m) / s) == pytest.approx(0.05, rel=1e-12)
    assert stats.expon.sf((hi[0] - m) / s) == pytest.approx(0.05, rel=1e-12)


def test_sample_y_many_draws_shape():
    X = np.zeros((4, 1))
    Y = sample_y(1, X, np.random.default_rng(0), size=7)
    assert Y.shape == (4, 7)


def test_dataset_validates_and_subsets():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 1)), np.zeros(2))
    d = Dataset(np.arange(4.0), np.arange(4.0) * 2)
    assert d.X.shape == (4, 1) and len(d) == 4
    np.testing.assert_array_equal(d.subset([3, 1]).Y, [6.0, 2.0])
