import numpy as np
import pytest
from scipy import stats

from bnesolve.grids import Grid, discretize_density, make_uniform_grid


def test_uniform_grid_three_points():
    g = make_uniform_grid(0, 1, 3)
    assert np.array_equal(g.points, [0.0, 0.5, 1.0])
    assert g.count == 3
    assert g.coarseness == 0.25


def test_uniform_grid_spacing():
    g = make_uniform_grid(0, 1, 20)
    assert g.count == 20
    assert np.allclose(np.diff(g.points), 1 / 19)
    g = make_uniform_grid(1.0, 2.5, 64)
    assert np.allclose(np.diff(g.points), 1.5 / 63)
    assert g.points[0] == 1.0 and g.points[-1] == 2.5


def test_uniform_grid_rejects_bad_inputs():
    with pytest.raises(ValueError):
        make_uniform_grid(0, 1, 1)
    with pytest.raises(ValueError):
        make_uniform_grid(1, 0, 5)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 0.0, 1.0]), 0.0, 1.0)
    with pytest.raises(ValueError):
        Grid(np.array([0.1, 0.5, 1.0]), 0.0, 1.0)


def test_nearest_point_and_ties():
    g = make_uniform_grid(0, 1, 3)
    assert g.nearest_point(0.24) == (0, 0.0)
    # exact midpoint resolves to the lower index
    assert g.nearest_point(0.25) == (0, 0.0)
    assert g.nearest_point(0.26) == (1, 0.5)
    assert g.nearest_point(1.3) == (2, 1.0)
    assert g.nearest_point(-0.7) == (0, 0.0)


def test_nearest_point_idempotent():
    g = make_uniform_grid(-1.5, 2.0, 17)
    for x in np.linspace(-2, 3, 101):
        idx, val = g.nearest_point(x)
        assert g.nearest_point(val) == (idx, val)


def test_nearest_index_vectorized_matches_scalar():
    g = make_uniform_grid(0, 2, 9)
    xs = np.linspace(-0.5, 2.5, 57)
    idx = g.nearest_index(xs)
    assert [g.nearest_point(x)[0] for x in xs] == idx.tolist()


def test_discretize_density_constant_is_exactly_uniform():
    g = make_uniform_grid(0, 1, 4)
    v = discretize_density(g, lambda x: np.ones_like(x))
    assert np.array_equal(v, np.full(4, 0.25))


def test_discretize_density_linear():
    g = make_uniform_grid(0, 1, 3)
    v = discretize_density(g, lambda x: x)
    assert np.allclose(v, [0.0, 1 / 3, 2 / 3], atol=1e-15)


def test_discretize_density_truncated_gaussian():
    g = make_uniform_grid(1.0, 1.4, 32)
    v = discretize_density(g, lambda x: np.exp(-0.5 * ((x - 1.2) / 0.1) ** 2))
    expected = stats.norm.pdf(g.points, loc=1.2, scale=0.1)
    expected /= expected.sum()
    assert np.allclose(v, expected, atol=1e-12)
    peak = np.argmax(v)
    assert abs(g.points[peak] - 1.2) <= g.coarseness
    assert np.all(np.diff(v[:peak + 1]) > 0) and np.all(np.diff(v[peak:]) < 0)


def test_discretize_density_rejects_degenerate():
    g = make_uniform_grid(0, 1, 4)
    with pytest.raises(ValueError):
        discretize_density(g, lambda x: np.zeros_like(x))
    with pytest.raises(ValueError):
        discretize_density(g, lambda x: -np.ones_like(x))
