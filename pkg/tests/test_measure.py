import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from dualpair.measure import (
    Box,
    NuMeasure,
    ProductBox,
    diagonal_ball,
    lens_volume,
    unit_ball_volume,
)
from dualpair.params import CANONICAL


@pytest.fixture(scope="module")
def nu():
    return NuMeasure(CANONICAL)


def planar_ball_mass(R, kappa):
    """nu(B x B) in the plane: lens area against the radial kernel."""
    def lens(d):
        return 2 * R * R * math.acos(d / (2 * R)) - d / 2 * math.sqrt(4 * R * R - d * d)
    return quad(lambda r: lens(r) * r ** (1 - kappa) * 2 * math.pi, 0, 2 * R, limit=200)[0]


def sampled_box_mass(first, second, kappa, samples=400_000, seed=11):
    rng = np.random.default_rng(seed)
    lo1, hi1 = np.array(first.lo), np.array(first.hi)
    lo2, hi2 = np.array(second.lo), np.array(second.hi)
    x = lo1 + (hi1 - lo1) * rng.random((samples, len(lo1)))
    y = lo2 + (hi2 - lo2) * rng.random((samples, len(lo2)))
    vals = np.linalg.norm(x - y, axis=1) ** -kappa
    vol = first.volume * second.volume
    return vol * vals.mean(), vol * vals.std() / math.sqrt(samples)


@pytest.mark.parametrize("R", [0.25, 0.5, 1.0])
def test_ball_mass_matches_lens_quadrature(nu, R):
    assert nu.mass(diagonal_ball((0.0, 0.0), R)) == pytest.approx(planar_ball_mass(R, nu.kappa), rel=1e-8)


def test_ball_constant_is_scaled_mass(nu):
    c = nu.ball_constant()
    for R in (0.25, 0.5, 1.0):
        assert CANONICAL.eps * nu.mass(diagonal_ball((0.0, 0.0), R)) / R**2.2 == pytest.approx(c, rel=1e-9)


@pytest.mark.parametrize("ratio", [2, 4])
@pytest.mark.parametrize("x", [(0.0, 0.0), (0.3, -0.2)])
def test_doubling_ratio_is_exact(nu, x, ratio):
    measured, exact = nu.doubling_check(x, 0.25 * ratio, 0.25)
    assert exact == pytest.approx(ratio**2.2, rel=1e-14)
    assert measured == pytest.approx(exact, rel=5e-3)


def test_separated_boxes_against_sampling(nu):
    first, second = Box((0.0, 0.0), (0.5, 0.5)), Box((1.0, 0.0), (1.5, 0.5))
    est, err = sampled_box_mass(first, second, nu.kappa)
    assert abs(nu.mass(ProductBox(first, second)) - est) < 4 * err


def test_touching_boxes_against_sampling(nu):
    first, second = Box((0.0, 0.0), (0.25, 0.25)), Box((0.25, 0.0), (0.5, 0.25))
    est, err = sampled_box_mass(first, second, nu.kappa, samples=1_000_000)
    assert abs(nu.mass(ProductBox(first, second)) - est) < 4 * err


def test_mc_oracle_agrees_within_three_sigma(nu):
    region = diagonal_ball((0.0, 0.0), 0.5)
    est, err = nu.mc_oracle(region, 40_000, 0)
    assert err > 0
    assert abs(est - nu.mass(region)) <= 3 * err


def test_mc_oracle_needs_enough_samples(nu):
    with pytest.raises(ValueError):
        nu.mc_oracle(diagonal_ball((0.0, 0.0), 0.5), 100, 0)


@settings(max_examples=25, deadline=None)
@given(
    a=st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
    shift=st.tuples(st.floats(-2, 2), st.floats(-2, 2)),
    side=st.floats(0.05, 0.5),
)
def test_box_mass_symmetric_and_translation_invariant(nu, a, shift, side):
    first = Box.cube(a, side)
    second = Box.cube((a[0] + 0.7, a[1] - 0.3), side)
    m = nu.mass(ProductBox(first, second))
    assert nu.mass(ProductBox(second, first)) == pytest.approx(m, rel=1e-9)
    assert nu.mass(ProductBox(first.shifted(shift), second.shifted(shift))) == pytest.approx(m, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(side=st.floats(0.05, 1.0), scale=st.floats(0.2, 5.0))
def test_box_mass_scales_with_homogeneity(nu, side, scale):
    first = Box.cube((0.0, 0.0), side)
    second = Box.cube((side, 0.5 * side), side)
    m = nu.mass(ProductBox(first, second))
    big = nu.mass(ProductBox(Box.cube((0.0, 0.0), scale * side), Box.cube((scale * side, 0.5 * scale * side), scale * side)))
    assert big == pytest.approx(scale**nu.homogeneity * m, rel=1e-7)


def test_cell_pair_table_sums_to_box_mass(nu):
    h, reach = 0.25, 3
    table = nu.cell_pair_table(h, reach)
    # total over a 4 x 4 block of cells paired with itself
    total = 0.0
    for i in np.ndindex(4, 4):
        for j in np.ndindex(4, 4):
            total += table[j[0] - i[0] + reach, j[1] - i[1] + reach]
    big = Box((0.0, 0.0), (1.0, 1.0))
    assert total == pytest.approx(nu.mass(ProductBox(big, big)), rel=1e-8)


@given(st.floats(0.1, 2.0), st.floats(0.1, 2.0), st.floats(0.0, 4.5))
def test_lens_volume_bounds(r1, r2, d):
    v = lens_volume(2, r1, r2, d)
    assert -1e-12 <= v <= unit_ball_volume(2) * min(r1, r2) ** 2 * (1 + 1e-12)
    if d >= r1 + r2:
        assert v == 0
