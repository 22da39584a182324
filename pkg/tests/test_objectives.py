import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from pressure_embed.core import AffinityGraph, EvaluationError, ValidationError
from pressure_embed.objectives import Method, gradient, objective, value_and_gradient

TAGS = ["EE", "SNE", "TSNE", "UMAP"]


def two_point(lam=1.0):
    return AffinityGraph(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[0.0, 1.0], [1.0, 0.0]]), lam)


def random_graph(rng, n, normalize=False):
    return AffinityGraph(oracles.random_symmetric(rng, n, normalize=normalize),
                         oracles.random_symmetric(rng, n), rng.uniform(0.1, 1.0))


def test_ee_coincident_two_points():
    assert objective("EE", two_point(), [[0.0], [0.0]])[0] == pytest.approx(2.0, rel=1e-15)


def test_ee_two_points_apart():
    total, att, rep = objective("EE", two_point(), [[0.0], [1.0]])
    assert total == pytest.approx(2.0 + 2.0 * np.exp(-1.0), rel=1e-14)
    assert att == pytest.approx(2.0) and rep == pytest.approx(2.0 * np.exp(-1.0))


def test_ee_gradient_two_points():
    g = gradient("EE", two_point(), [[0.0], [1.0]])
    assert g[0, 0] == pytest.approx(-4.0 + 4.0 * np.exp(-1.0), rel=1e-14)
    assert g[1, 0] == pytest.approx(-g[0, 0], rel=1e-15)


@pytest.mark.parametrize("tag", TAGS)
def test_matches_loop_oracle(tag):
    rng = np.random.default_rng(7)
    g = random_graph(rng, 6, normalize=tag != "EE")
    x = rng.normal(size=(6, 2))
    m = Method(tag, 1.3, 0.9)
    ref = oracles.loop_objective(tag, g.w_plus, g.w_minus, g.lam, x, 1.3, 0.9)
    assert objective(m, g, x)[0] == pytest.approx(ref, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("tag", TAGS)
def test_coincident_points_zero_gradient(tag):
    g = two_point()
    grad = gradient(Method(tag), g, np.zeros((2, 2)))
    np.testing.assert_array_equal(grad[0], -grad[1])
    np.testing.assert_array_equal(grad, 0.0)


@pytest.mark.parametrize("tag", TAGS)
def test_gradient_finite_differences(tag):
    rng = np.random.default_rng(11)
    m = Method(tag, 1.5, 0.8)
    for _ in range(5):
        g = random_graph(rng, 8, normalize=tag != "EE")
        x = rng.normal(size=(8, 2))
        fd = oracles.fd_gradient(lambda v: objective(m, g, v)[0], x)
        an = gradient(m, g, x)
        assert np.linalg.norm(an - fd) <= 1e-6 * np.linalg.norm(fd)


@pytest.mark.parametrize("tag", TAGS)
@given(seed=st.integers(0, 10_000), angle=st.floats(0, 2 * np.pi), shift=st.floats(-5, 5))
def test_rigid_motion_invariance(tag, seed, angle, shift):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 5, normalize=tag != "EE")
    x = rng.normal(size=(5, 2))
    r = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    m = Method(tag)
    f = objective(m, g, x)[0]
    assert objective(m, g, x @ r + shift)[0] == pytest.approx(f, abs=1e-9, rel=1e-9)
    np.testing.assert_allclose(gradient(m, g, x).sum(axis=0), 0.0, atol=1e-8)


@pytest.mark.parametrize("tag", ["EE", "SNE"])
def test_attraction_nonnegative(tag):
    rng = np.random.default_rng(5)
    g = random_graph(rng, 6)
    assert objective(tag, g, rng.normal(size=(6, 2)))[1] >= 0


def test_value_and_gradient_consistent():
    rng = np.random.default_rng(9)
    g = random_graph(rng, 6, normalize=True)
    x = rng.normal(size=(6, 2))
    for tag in TAGS:
        f, grad = value_and_gradient(tag, g, x)
        assert f == objective(tag, g, x)[0]
        np.testing.assert_array_equal(grad, gradient(tag, g, x))


def test_tsne_umap_coincident_points_finite():
    g = two_point()
    for tag in ["TSNE", "UMAP"]:
        f, grad = value_and_gradient(tag, g, np.zeros((2, 2)))
        assert np.isfinite(f) and np.all(np.isfinite(grad))


def test_ee_overflow_raises():
    g = AffinityGraph(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[0.0, 1e308], [1e308, 0.0]]), 10.0)
    with pytest.raises(EvaluationError):
        objective("EE", g, np.zeros((2, 1)))


def test_method_validation():
    assert Method("t-sne").tag == "TSNE"
    with pytest.raises(ValidationError):
        Method("pca")
    with pytest.raises(ValidationError):
        Method("UMAP", umap_a=0.0)
    with pytest.raises(ValidationError):
        objective("EE", two_point(), np.zeros((3, 1)))
