import numpy as np
import pytest

from bnesolve.grids import make_uniform_grid
from bnesolve.strategy import (Strategy, init_strategy, iterate_distance, load_strategy,
                               save_strategy)


def simple_strategy(k=3, l=3, seed=0, marginal=None, ndim=1):
    og = make_uniform_grid(0, 1, k)
    ags = tuple(make_uniform_grid(0, 1, l) for _ in range(ndim))
    if marginal is None:
        marginal = np.full(k, 1.0 / k)
    return init_strategy("random", og, ags, marginal, seed=seed)


def test_uniform_init():
    s = init_strategy("uniform", make_uniform_grid(0, 1, 2),
                      [make_uniform_grid(0, 1, 2)], np.array([0.5, 0.5]))
    assert np.array_equal(s.matrix, [[0.25, 0.25], [0.25, 0.25]])


def test_truthful_init_diagonal():
    g = make_uniform_grid(0, 1, 3)
    s = init_strategy("truthful", g, [g], np.full(3, 1 / 3))
    assert np.allclose(s.matrix, np.eye(3) / 3)


def test_random_init_rows_sum_to_marginal():
    marginal = np.array([0.1, 0.0, 0.5, 0.4])
    for seed in range(5):
        s = simple_strategy(k=4, l=6, seed=seed, marginal=marginal)
        assert np.max(np.abs(s.matrix.sum(axis=1) - marginal)) < 1e-12
        assert np.all(s.matrix >= 0)


def test_unknown_init_mode():
    g = make_uniform_grid(0, 1, 2)
    with pytest.raises(ValueError):
        init_strategy("hopeful", g, [g], np.array([0.5, 0.5]))


def test_conditional():
    g = make_uniform_grid(0, 1, 2)
    s = Strategy(np.array([[0.1, 0.4], [0.2, 0.3]]), g, (g,), np.array([0.5, 0.5]))
    assert np.allclose(s.conditional(0), [0.2, 0.8])
    uni = init_strategy("uniform", g, [g], np.array([0.5, 0.5]))
    assert np.allclose(uni.conditional(1), [0.5, 0.5])


def test_conditional_zero_marginal_errors():
    g = make_uniform_grid(0, 1, 2)
    s = Strategy(np.array([[0.0, 0.0], [0.5, 0.5]]), g, (g,), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        s.conditional(0)
    with pytest.raises(ValueError):
        s.sample_bids([0.1], np.random.default_rng(0))


def test_sample_bids_truthful():
    g = make_uniform_grid(0, 1, 3)
    s = init_strategy("truthful", g, [g], np.full(3, 1 / 3))
    b = s.sample_bids([0.52, 0.1, 0.9], np.random.default_rng(0))
    assert b[:, 0].tolist() == [0.5, 0.0, 1.0]


def test_sample_bids_degenerate_row():
    g = make_uniform_grid(0, 1, 3)
    mat = np.zeros((3, 3))
    mat[:, 0] = 1 / 3
    s = Strategy(mat, g, (g,), np.full(3, 1 / 3))
    b = s.sample_bids(np.random.default_rng(1).uniform(0, 1, 100), np.random.default_rng(2))
    assert np.all(b == 0.0)


def test_sample_bids_empirical_matches_conditional():
    s = simple_strategy(k=4, l=5, seed=3)
    rng = np.random.default_rng(7)
    obs = np.full(100_000, 0.34)  # snaps to row 1
    b = s.sample_bids(obs, rng)[:, 0]
    freq = np.array([(b == v).mean() for v in s.action_grids[0].points])
    assert 0.5 * np.abs(freq - s.conditional(1)).sum() < 0.01


def test_iterate_distance():
    g = make_uniform_grid(0, 1, 2)
    uni = init_strategy("uniform", g, [g], np.array([0.5, 0.5]))
    tru = init_strategy("truthful", g, [g], np.array([0.5, 0.5]))
    assert iterate_distance(uni, uni) == 0.0
    assert iterate_distance(uni, tru) == pytest.approx(0.5)
    assert iterate_distance(uni, tru) == iterate_distance(tru, uni)
    with pytest.raises(ValueError):
        iterate_distance(uni, simple_strategy(k=3, l=3))


def test_with_matrix_clamps_tiny_negatives():
    g = make_uniform_grid(0, 1, 2)
    s = init_strategy("uniform", g, [g], np.array([0.5, 0.5]))
    wobble = s.matrix.copy()
    wobble[0, 0] = -5e-15
    wobble[0, 1] = 0.5 + 5e-15
    fixed = s.with_matrix(wobble)
    assert np.all(fixed.matrix >= 0)
    assert np.max(np.abs(fixed.matrix.sum(axis=1) - s.marginal)) < 1e-12
    with pytest.raises(ValueError):
        s.with_matrix(np.array([[-0.1, 0.6], [0.25, 0.25]]))


def test_feasibility_validated():
    g = make_uniform_grid(0, 1, 2)
    with pytest.raises(ValueError):
        Strategy(np.array([[0.3, 0.3], [0.25, 0.25]]), g, (g,), np.array([0.5, 0.5]))


def test_multidim_action_layout_row_major():
    og = make_uniform_grid(0, 1, 2)
    a1 = make_uniform_grid(1.0, 2.5, 2)
    a2 = make_uniform_grid(0.3, 1.2, 3)
    s = init_strategy("uniform", og, [a1, a2], np.array([0.5, 0.5]))
    av = s.action_values()
    assert av.shape == (6, 2)
    assert av[0].tolist() == [1.0, 0.3]
    assert av[1].tolist() == [1.0, 0.75]  # second axis varies fastest
    assert av[3].tolist() == [2.5, 0.3]


def test_csv_round_trip_bit_exact(tmp_path):
    s = simple_strategy(k=5, l=4, seed=11)
    path = tmp_path / "strategy_agent0.csv"
    save_strategy(s, path, metadata={"mechanism": "fpsb", "iteration": 123, "seed": [1, 0]})
    loaded, meta = load_strategy(path)
    assert np.array_equal(loaded.matrix, s.matrix)
    assert np.array_equal(loaded.marginal, s.marginal)
    assert np.array_equal(loaded.obs_grid.points, s.obs_grid.points)
    assert meta["mechanism"] == "fpsb" and meta["iteration"] == 123


def test_csv_round_trip_two_dimensional(tmp_path):
    og = make_uniform_grid(1.0, 1.4, 3)
    ags = (make_uniform_grid(1.0, 2.5, 3), make_uniform_grid(0.3, 1.2, 2))
    marginal = np.array([0.25, 0.5, 0.25])
    s = init_strategy("random", og, ags, marginal, seed=5)
    path = tmp_path / "s.csv"
    save_strategy(s, path)
    loaded, _ = load_strategy(path)
    assert np.array_equal(loaded.matrix, s.matrix)
    assert len(loaded.action_grids) == 2
    assert np.array_equal(loaded.action_grids[1].points, ags[1].points)
    header = path.read_text().splitlines()[0]
    assert header == "obs_index,action_index,mass,obs_value,action_value_0,action_value_1"
