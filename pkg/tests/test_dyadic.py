import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualpair.dyadic import (
    DyadicCube,
    Geometry,
    ProductCube,
    ResolvabilityError,
    covering_check,
    empirical_dim_constants,
    enumerate_cubes,
    k0_level,
)
from dualpair.params import CANONICAL

RELAXED = Geometry((0.0, 0.0), 0.35, 0.4, 0.5, chi=0.25, ball_factor=3.0)
FAITHFUL = Geometry((0.0, 0.0), 0.35, 0.4, 0.5)


def box_distance(lo1, hi1, lo2, hi2):
    """Distance between closed boxes by clamping one box's nearest point."""
    lo1, hi1, lo2, hi2 = map(np.asarray, (lo1, hi1, lo2, hi2))
    gap = np.maximum(0.0, np.maximum(lo2 - hi1, lo1 - hi2))
    return float(np.sqrt(np.sum(gap**2)))


def diagonal_distance(lo1, hi1, lo2, hi2):
    """min over x in K1, y in K2 of the distance from (x, y) to {(z, z)}.

    Per axis, the nearest diagonal point to (x, y) is ((x+y)/2, (x+y)/2) at
    distance |x - y| / sqrt 2; minimise |x - y| by a fine scan instead of
    the interval gap formula.
    """
    total = 0.0
    for a, b, c, d in zip(lo1, hi1, lo2, hi2):
        xs = np.linspace(a, b, 65)
        ys = np.linspace(c, d, 65)
        total += np.min(np.abs(xs[:, None] - ys[None, :])) ** 2 / 2
    return math.sqrt(total)


cube_pairs = st.tuples(
    st.integers(0, 6),
    st.tuples(st.integers(-20, 20), st.integers(-20, 20)),
    st.tuples(st.integers(-20, 20), st.integers(-20, 20)),
)


@given(cube_pairs)
def test_diagonal_and_projection_distances(data):
    level, i1, i2 = data
    K1 = DyadicCube((0.0, 0.0), level, i1)
    K2 = DyadicCube((0.0, 0.0), level, i2)
    cube = ProductCube(K1, K2)
    d12 = box_distance(K1.lo, K1.hi, K2.lo, K2.hi)
    assert cube.factor_distance() == pytest.approx(d12, abs=1e-12)
    assert cube.distance_to_diagonal() == pytest.approx(d12 / math.sqrt(2), abs=1e-12)
    assert cube.distance_to_diagonal() == pytest.approx(diagonal_distance(K1.lo, K1.hi, K2.lo, K2.hi), abs=1e-12)
    pi1, pi2 = cube.projection(1), cube.projection(2)
    assert pi1.distance(pi2) == pytest.approx(math.sqrt(2) * d12, abs=1e-12)


@given(st.integers(1, 6), st.tuples(st.integers(-30, 30), st.integers(-30, 30)))
def test_parent_children_round_trip(level, idx):
    cube = DyadicCube((0.1, -0.2), level, idx)
    kids = cube.children()
    assert len(kids) == 4
    assert all(k.parent() == cube and cube.contains(k) for k in kids)
    assert sum(k.side**2 for k in kids) == pytest.approx(cube.side**2)
    assert not kids[0].contains(cube)


def test_product_cube_helpers():
    K1 = DyadicCube((0.0, 0.0), 3, (0, 0))
    K2 = DyadicCube((0.0, 0.0), 3, (2, 0))
    c = ProductCube(K1, K2, root_level=2)
    assert c.symm() == ProductCube(K2, K1)
    assert len(c.children()) == 16
    assert c.predecessor() == ProductCube(K1.parent(), K2.parent())
    with pytest.raises(ValueError):
        ProductCube(K1.parent(), K2.parent(), root_level=2).predecessor()
    with pytest.raises(ValueError):
        ProductCube(K1, K2.parent())


def test_near_diagonal_uses_predecessor():
    near = ProductCube(DyadicCube((0.0,), 3, (1,)), DyadicCube((0.0,), 3, (2,)))
    far = ProductCube(DyadicCube((0.0,), 3, (0,)), DyadicCube((0.0,), 3, (6,)))
    assert near.near_diagonal()
    assert not far.near_diagonal()


def test_k0_levels():
    assert RELAXED.k0 == 2
    # faithful divisor n 40^(n+1) = 128000 over alpha - beta = 0.1
    assert FAITHFUL.k0 == math.floor(math.log2(1.28e6)) + 1
    assert k0_level(0.5, 0.4, 2, chi=0.1) == 1


def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry((0.0, 0.0), 0.35, 0.6, 0.5).validate()
    with pytest.raises(ValueError):
        Geometry((0.0, 0.0), 0.35, 0.4, 0.53).validate()
    RELAXED.validate()


def test_exit_radii_are_decreasing_and_capped():
    radii = RELAXED.exit_radii(4)
    assert radii == sorted(radii, reverse=True)
    assert radii[0] <= RELAXED.radius_cap() * (1 + 1e-12)
    assert radii == pytest.approx([0.530330085889911, 0.2651650429449553])


def test_faithful_geometry_is_unresolvable():
    with pytest.raises(ResolvabilityError):
        enumerate_cubes(FAITHFUL, FAITHFUL.k0)


def test_covering_admission_covers_inner_ball():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.5, 0.5, size=(4000, 2))
    res = covering_check(RELAXED, 4, pts)
    assert res["inner_covered_once"]
    assert res["points_checked"] > 1000


def test_printed_admission_misses_inner_ball():
    geo = Geometry((0.0, 0.0), 0.35, 0.4, 0.5, chi=0.25, ball_factor=3.0, admission="printed")
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.5, 0.5, size=(4000, 2))
    assert not covering_check(geo, 4, pts)["inner_covered_once"]


def test_enumerated_cubes_meet_admission_ball():
    coll = enumerate_cubes(RELAXED, 3)
    for cube in coll.cubes:
        assert cube.distance_to_point(RELAXED.x0) <= RELAXED.admission_radius + 1e-12
    # a brute scan over a wider index window finds nothing extra
    found = {c.index for c in coll.cubes}
    for idx in itertools.product(range(-8, 8), repeat=2):
        c = DyadicCube((0.0, 0.0), 3, idx)
        assert (c.distance_to_point(RELAXED.x0) <= RELAXED.admission_radius + 1e-12) == (idx in found)


def test_dimensional_constants_stable_in_eps():
    levels = range(RELAXED.k0, RELAXED.k0 + 4)
    out = empirical_dim_constants(CANONICAL, RELAXED, levels, (0.05, 0.1, 0.2))
    for key in ("C_dd", "C_ddd"):
        vals = [v[key] for v in out["per_eps"].values()]
        assert all(math.isfinite(v) and v > 0 for v in vals)
        assert max(vals) / min(vals) < 4
