import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualpair.grid import CATALOG, Grid, GridFunction, make_catalog_function


@pytest.fixture(scope="module")
def grid():
    return Grid.symmetric(2, 16)


def test_grid_geometry(grid):
    assert grid.h == 0.125
    assert grid.hi == 1.0
    assert grid.centers().shape == (256, 2)
    assert np.all(grid.distance_to_outside() >= grid.h / 2 - 1e-15)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3))
def test_interpolation_reproduces_affine_functions(x, y, a, b, c):
    g = Grid.symmetric(2, 16)
    vals = g.centers() @ np.array([a, b]) + c
    u = GridFunction(g, vals)
    inside_centers = abs(x) <= 1 - g.h / 2 and abs(y) <= 1 - g.h / 2
    if inside_centers:
        assert u([[x, y]])[0] == pytest.approx(a * x + b * y + c, abs=1e-10)


def test_outside_value(grid):
    u = make_catalog_function("constant", grid, c=2.5)
    assert u([[3.0, 0.0]])[0] == 2.5
    assert np.all(u.gradient_norm() == 0)
    assert np.all(u.exterior_jump() == 0)
    v = make_catalog_function("bump", grid)
    assert v([[3.0, 0.0]])[0] == 0.0


def test_gradient_ignores_the_outside_value(grid):
    u = GridFunction(grid, np.ones(grid.size))
    assert np.all(u.gradient_norm() == 0)
    assert np.all(u.exterior_jump() == 1)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_gradient_exact_for_affine(a, b):
    g = Grid.symmetric(2, 8)
    u = GridFunction(g, g.centers() @ np.array([a, b]))
    assert u.gradient_norm() == pytest.approx(np.full(g.size, np.hypot(a, b)), abs=1e-9)


@pytest.mark.parametrize("name", CATALOG)
def test_catalog_entries_are_finite(grid, name):
    u = make_catalog_function(name, grid)
    assert u.values.shape == grid.shape
    assert np.all(np.isfinite(u.values))


def test_catalog_is_deterministic(grid):
    a = make_catalog_function("trig-random", grid, seed=3)
    b = make_catalog_function("trig-random", grid, seed=3)
    c = make_catalog_function("trig-random", grid, seed=4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_unknown_catalog_name(grid):
    with pytest.raises(KeyError):
        make_catalog_function("sawtooth", grid)


def test_bump_is_radial_and_compact(grid):
    u = make_catalog_function("bump", grid, radius=0.5)
    r = np.linalg.norm(grid.centers(), axis=1)
    assert np.all(u.flat()[r >= 0.5] == 0)
    assert u.flat()[r < 0.2].min() > 0


def test_non_finite_samples_rejected(grid):
    with pytest.raises(ValueError):
        GridFunction(grid, np.full(grid.size, np.nan))
