import numpy as np
import pytest

import oracles
from pressure_embed.augmented import (
    MuSchedule,
    augmented_gradient,
    augmented_objective,
    augmented_value_and_gradient,
    initial_state,
    make_mu_schedule,
    update_pressured_set,
)
from pressure_embed.core import (
    AffinityGraph,
    AugmentedState,
    ConfigurationError,
    Embedding,
    ValidationError,
)
from pressure_embed.objectives import gradient, objective
from pressure_embed.pressure import compute_pressure


def pair_graph(lam):
    one = np.array([[0.0, 1.0], [1.0, 0.0]])
    return AffinityGraph(one, one, lam)


def random_state(tag, seed, n_pressured=2, mu=0.0, n=6):
    wp, wm, lam, x = oracles.random_instance(tag, seed, n)
    rng = np.random.default_rng(seed + 1000)
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, n_pressured, replace=False)] = True
    z = np.where(mask, rng.normal(size=n), 0.0)
    return AffinityGraph(wp, wm, lam), AugmentedState(Embedding(x), z, mask, mu)


@pytest.mark.parametrize("tag", ["EE", "SNE"])
def test_zero_lift_equals_objective(tag):
    for seed in range(10):
        g, s = random_state(tag, seed)
        flat = AugmentedState(s.embedding, np.zeros(6), s.pressured, 0.0)
        assert augmented_objective(tag, g, flat) == pytest.approx(objective(tag, g, s.x)[0],
                                                                  rel=1e-12, abs=1e-12)


def test_ee_matches_expansion():
    for seed in range(10):
        g, s = random_state("EE", seed)
        want = oracles.ee_expansion(g.w_plus, g.w_minus, g.lam, s.x, s.z,
                                    set(np.flatnonzero(s.pressured)))
        assert augmented_objective("EE", g, s) == pytest.approx(want, rel=1e-10)


def test_ee_expansion_with_penalty():
    g, s = random_state("EE", 4, n_pressured=3, mu=1e6)
    want = oracles.ee_expansion(g.w_plus, g.w_minus, g.lam, s.x, s.z, set(np.flatnonzero(s.pressured)))
    want += 1e6 * np.sum(s.z[s.pressured] ** 2)
    assert augmented_objective("EE", g, s) == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("tag", ["EE", "SNE"])
@pytest.mark.parametrize("mu", [0.0, 0.7])
def test_gradient_finite_differences(tag, mu):
    for seed in range(5):
        g, s = random_state(tag, seed, n=8, mu=mu)
        gx, gz = augmented_gradient(tag, g, s)

        def f_x(x):
            return augmented_objective(tag, g, AugmentedState(Embedding(x), s.z, s.pressured, mu))

        def f_z(z):
            return augmented_objective(tag, g, AugmentedState(s.embedding, np.where(s.pressured, z, 0.0),
                                                              s.pressured, mu))

        fd_x = oracles.fd_gradient(f_x, s.x)
        fd_z = np.where(s.pressured, oracles.fd_gradient(f_z, s.z), 0.0)
        assert np.linalg.norm(gx - fd_x) <= 1e-6 * np.linalg.norm(fd_x)
        assert np.linalg.norm(gz - fd_z) <= 1e-6 * np.linalg.norm(fd_z)


def test_gradient_reduces_to_base_case():
    g, s = random_state("SNE", 2, n_pressured=0)
    value, gx, gz = augmented_value_and_gradient("SNE", g, s)
    np.testing.assert_allclose(gx, gradient("SNE", g, s.x), rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(gz, 0.0)
    assert value == objective("SNE", g, s.x)[0]


def test_gradient_z_zero_off_set():
    g, s = random_state("EE", 5, n_pressured=3, mu=2.0)
    _, gz = augmented_gradient("EE", g, s)
    assert np.all(gz[~s.pressured] == 0.0)


def test_repulsion_damping():
    g, s = random_state("EE", 6, n_pressured=2)
    i = int(np.flatnonzero(s.pressured)[0])
    damp = np.exp(-s.z[i] ** 2)
    assert damp < 1.0
    # raising z_i only weakens repulsion to points left in the plane
    assert np.all(g.lam * g.w_minus[i] * damp <= g.lam * g.w_minus[i])


def test_update_no_pressured_points_is_fixed_point():
    g = pair_graph(0.5)
    s = AugmentedState(Embedding(np.zeros((2, 1))), np.zeros(2), np.zeros(2, dtype=bool), 0.0)
    assert not compute_pressure("EE", g, s.x).mask.any()
    assert update_pressured_set("EE", g, s) is s


def test_entrant_starts_at_pressure_value():
    g = pair_graph(np.exp(0.49))  # pressure sqrt(0.49) = 0.7
    s = AugmentedState(Embedding(np.zeros((2, 1))), np.zeros(2), np.zeros(2, dtype=bool))
    out = update_pressured_set("EE", g, s)
    np.testing.assert_allclose(out.z, 0.7, rtol=1e-14)
    assert out.pressured.all()


@pytest.mark.parametrize("tag", ["EE", "SNE"])
def test_membership_follows_classification(tag):
    for seed in range(20):
        g, s = random_state(tag, seed, n_pressured=0)
        out = update_pressured_set(tag, g, s)
        np.testing.assert_array_equal(out.pressured, compute_pressure(tag, g, s.x).mask)


def test_stale_member_leaves():
    g = pair_graph(0.5)
    mask = np.array([True, False])
    # the EE slice of a non-pressured point rises monotonically, so a snap to 0 is safe
    high = AugmentedState(Embedding(np.zeros((2, 1))), np.array([0.5, 0.0]), mask, 0.0)
    flat = AugmentedState(high.embedding, np.zeros(2), mask, 0.0)
    assert augmented_objective("EE", g, flat) < augmented_objective("EE", g, high)
    out = update_pressured_set("EE", g, high)
    assert not out.pressured.any() and not out.z.any()
    tiny = AugmentedState(high.embedding, np.array([1e-7, 0.0]), mask, 0.0)
    out = update_pressured_set("EE", g, tiny)
    assert not out.pressured.any() and not out.z.any()


def test_pressured_member_keeps_its_lift():
    g = pair_graph(np.e)
    s = AugmentedState(Embedding(np.zeros((2, 1))), np.array([0.3, 0.4]), np.ones(2, dtype=bool), 0.0)
    assert update_pressured_set("EE", g, s) is s


def test_initial_state():
    g = oracles.three_point_graph()
    s = initial_state("EE", g, oracles.THREE_POINT_X0)
    rep = compute_pressure("EE", g, oracles.THREE_POINT_X0)
    np.testing.assert_array_equal(s.z, rep.pressure)
    np.testing.assert_array_equal(s.pressured, rep.mask)


def test_schedule_strategies():
    d = np.array([1.0, 2.0, 3.0])
    mean = make_mu_schedule(d, "mean")
    assert mean.step == 2.0
    np.testing.assert_array_equal(mean.values(4), [0.0, 2.0, 4.0, 6.0])
    assert make_mu_schedule(d, "max").step == 3.0
    assert make_mu_schedule(d, "min").step == 1.0
    assert len(list(make_mu_schedule(d, "mean", cap=5))) == 5


def test_schedule_errors():
    with pytest.raises(ConfigurationError):
        make_mu_schedule(np.zeros(3))
    with pytest.raises(ConfigurationError):
        make_mu_schedule(np.array([0.0, 1.0]), "min")
    with pytest.raises(ConfigurationError):
        make_mu_schedule(np.ones(3), "median")
    with pytest.raises(ConfigurationError):
        MuSchedule("mean", 0.0)


def test_rejects_other_methods():
    g, s = random_state("EE", 0)
    with pytest.raises(ValidationError):
        augmented_objective("TSNE", g, s)
