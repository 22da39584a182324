import numpy as np
import pytest

from pressure_embed.affinity import (
    AffinityConfig,
    build_affinities,
    calibrate_perplexity,
    row_perplexity,
)
from pressure_embed.core import CalibrationError, ConfigurationError, pairwise_sqdist


def entropy_perplexity(row):
    p = row[row > 0]
    return float(np.exp(-np.sum(p * np.log(p))))


def test_two_points_sigma_one():
    y = np.array([[0.0, 0.0], [1.0, 1.0]])
    g = build_affinities(y, AffinityConfig(sigma=1.0))
    assert g.w_plus[0, 1] == pytest.approx(np.exp(-1.0), rel=1e-15)
    assert g.w_minus[0, 1] == pytest.approx(2.0, rel=1e-15)


def test_uniform_w_minus():
    y = np.random.default_rng(0).normal(size=(4, 2))
    g = build_affinities(y, AffinityConfig(sigma=1.0, w_minus_mode="uniform"))
    np.testing.assert_array_equal(g.w_minus, 1.0 - np.eye(4))


def test_perplexity_rows_hit_target():
    y = np.random.default_rng(1).normal(size=(10, 3))
    p, _ = calibrate_perplexity(pairwise_sqdist(y), 5.0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, rtol=1e-12)
    for row in p:
        assert abs(entropy_perplexity(row) - 5.0) < 1e-3
    np.testing.assert_allclose(row_perplexity(p), 5.0, atol=1e-4)


def test_perplexity_graph_normalized():
    y = np.random.default_rng(2).normal(size=(30, 3))
    g = build_affinities(y, AffinityConfig(perplexity=8.0))
    assert g.w_plus.sum() == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_array_equal(g.w_plus, g.w_plus.T)


def test_scaling_data_and_sigma_together():
    y = np.random.default_rng(3).normal(size=(8, 3))
    a = build_affinities(y, AffinityConfig(sigma=0.7)).w_plus
    b = build_affinities(3.5 * y, AffinityConfig(sigma=0.7 * 3.5)).w_plus
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_weight_decreases_with_distance():
    y = np.array([[0.0], [0.5], [1.0], [2.0]])
    w = build_affinities(y, AffinityConfig(sigma=1.0)).w_plus[0]
    assert w[1] > w[2] > w[3]


def test_calibration_error_names_point():
    sq = pairwise_sqdist(np.array([[0.0], [0.0], [0.0], [1.0]]))
    with pytest.raises(CalibrationError, match="point"):
        calibrate_perplexity(sq, 3.5)


@pytest.mark.parametrize("kwargs", [dict(), dict(sigma=1.0, perplexity=5.0), dict(sigma=-1.0),
                                    dict(perplexity=0.5), dict(sigma=1.0, lam=-1.0),
                                    dict(sigma=1.0, w_minus_mode="bogus")])
def test_bad_configs(kwargs):
    with pytest.raises(ConfigurationError):
        AffinityConfig(**kwargs)


def test_perplexity_must_be_below_n():
    with pytest.raises(ConfigurationError):
        build_affinities(np.eye(4), AffinityConfig(perplexity=4.0))
