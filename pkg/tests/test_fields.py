import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad

from dualpair.dyadic import Geometry
from dualpair.fields import (
    DiagonalEvaluationError,
    EmptyRegionError,
    FunctionalEvaluator,
    PairKernel,
    PairRegion,
    constants_ledger,
    counting_constant,
    dual_pair_routes,
    gagliardo_seminorm,
    kappa_choice,
    radius_lattice,
    thresholds,
)
from dualpair.grid import Grid, GridFunction, make_catalog_function
from dualpair.params import CANONICAL, derive_exponents

RELAXED = Geometry((0.0, 0.0), 0.35, 0.4, 0.5, chi=0.25, ball_factor=3.0)


@pytest.fixture(scope="module")
def grid16():
    return Grid.symmetric(2, 16)


@pytest.fixture(scope="module")
def kern16(grid16):
    return PairKernel(CANONICAL, make_catalog_function("trig-random", grid16, seed=0))


@pytest.fixture(scope="module")
def kern32():
    g = Grid.symmetric(2, 32)
    return PairKernel(CANONICAL, make_catalog_function("bump", g))


def affine_box_seminorm(p, s, n=2, half=1.0):
    """int over [-half, half]^2 twice of |x1 - y1|^p / |x - y|^{n + s p}, via the difference variable."""
    L = 2 * half

    def f(r, th):
        c, si = math.cos(th), math.sin(th)
        return (r * c) ** p * r ** (-n - s * p) * (L - r * c) * (L - r * si) * r

    def rmax(th):
        return min(L / max(math.cos(th), 1e-300), L / max(math.sin(th), 1e-300))

    return 4 * dblquad(f, 0, math.pi / 2, lambda th: 0.0, rmax, epsabs=1e-11, epsrel=1e-11)[0]


@pytest.mark.parametrize("cells", [16, 32])
def test_seminorm_of_affine_function(cells):
    g = Grid.symmetric(2, cells)
    u = GridFunction(g, g.centers()[:, 0])
    assert gagliardo_seminorm(u, 0.6, 2.0) == pytest.approx(affine_box_seminorm(2.0, 0.6), rel=0.01)


def test_seminorm_validates(grid16):
    u = make_catalog_function("bump", grid16)
    with pytest.raises(ValueError):
        gagliardo_seminorm(u, 1.2, 2.0)
    with pytest.raises(ValueError):
        gagliardo_seminorm(u, 0.5, 2.0, mask=np.ones(3, dtype=bool))


def test_kernel_matrices_are_symmetric(kern16):
    for name in ("U", "G", "H", "W", "D"):
        M = getattr(kern16, name)
        assert np.allclose(M, M.T, rtol=1e-13, atol=0)


def test_H_is_a_power_of_G(kern16):
    assert np.allclose(kern16.H, kern16.G ** (1 / kern16.exps.p_prime), rtol=1e-13)


def test_pointwise_eval_matches_matrix_off_diagonal(kern16, grid16):
    c = grid16.centers()
    for i, j in [(3, 40), (17, 200), (100, 101)]:
        assert kern16.eval("U", c[i], c[j]) == pytest.approx(kern16.U[i, j], rel=1e-10)
        assert kern16.eval("H", c[i], c[j]) == pytest.approx(kern16.H[i, j], rel=1e-10)
    with pytest.raises(DiagonalEvaluationError):
        kern16.eval("U", c[5], c[5])


def test_constant_function_has_vanishing_kernel(grid16):
    k = PairKernel(CANONICAL, make_catalog_function("constant", grid16, c=3.0))
    assert np.all(k.U == 0)
    assert np.all(k.G == 0)


def test_coefficient_must_stay_in_range(grid16):
    u = make_catalog_function("bump", grid16)
    g = GridFunction(grid16, np.full(grid16.size, 2.0))
    with pytest.raises(ValueError):
        PairKernel(CANONICAL, u, g=g)


def test_coefficient_adds_the_q_phase(grid16):
    u = make_catalog_function("bump", grid16)
    plain = PairKernel(CANONICAL, u)
    g = GridFunction(grid16, np.full(grid16.size, 0.5))
    phased = PairKernel(CANONICAL, u, g=g)
    off = ~np.eye(grid16.size, dtype=bool)
    assert np.all(phased.G[off] >= plain.G[off])
    assert np.any(phased.G[off] > plain.G[off])


@pytest.mark.parametrize("name", ["bump", "trig-random"])
def test_energy_routes_agree(name):
    g = Grid.symmetric(2, 32)
    k = PairKernel(CANONICAL, make_catalog_function(name, g))
    leb, nu = k.energy_routes()
    assert abs(leb - nu) / max(leb, nu) < 0.02


def test_dual_pair_routes_agree(kern32):
    leb, nu = dual_pair_routes(kern32, (0.0, 0.0), 0.5)
    assert abs(leb - nu) / max(leb, nu) < 0.02
    with pytest.raises(ValueError):
        dual_pair_routes(kern32, (0.0, 0.0), 1.5)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-0.5, 0.5), y=st.floats(-0.5, 0.5), r=st.floats(0.2, 0.45))
def test_jensen_ordering_on_diagonal_balls(kern16, grid16, x, y, r):
    region = PairRegion.diagonal_ball(grid16, (x, y), r)
    ex = kern16.exps
    if kern16.mass(region) <= 0:
        with pytest.raises(EmptyRegionError):
            kern16.nu_average("H", ex.gamma, region)
        return
    low = kern16.nu_average("H", ex.gamma, region) ** (1 / ex.gamma)
    high = kern16.nu_average("H", ex.p_prime, region) ** (1 / ex.p_prime)
    assert low <= high * (1 + 1e-12)


def test_functional_identity_and_monotonicity(kern16):
    ev = FunctionalEvaluator(kern16)
    vals = ev.evaluate_many([[0.0, 0.0], [0.25, -0.25]], [0.25, 0.5], M_big=4.0)
    for v in vals:
        assert v.theta_big == pytest.approx(v.upsilon0 + v.tail + v.psi_1)
        assert v.psi_M >= v.psi_1 >= 0
        assert v.tail_remainder >= 0
    with pytest.raises(ValueError):
        ev.evaluate([0.0, 0.0], 0.25, M_big=0.5)
    with pytest.raises(ValueError):
        ev.evaluate([0.9, 0.0], 0.5)


def test_ball_mass_inside_box_close_to_exact(kern32):
    ev = FunctionalEvaluator(kern32)
    st_ = ev.ball_stats(np.array([[0.0, 0.0]]), np.array([0.5]))
    assert st_["inside"][0]
    assert st_["mass"][0] == pytest.approx(ev.ball_mass_exact(0.5), rel=0.05)


def test_tail_terms_are_summands(kern16):
    ev = FunctionalEvaluator(kern16)
    v = ev.evaluate([0.0, 0.0], 0.25)
    terms = ev.tail_terms([0.0, 0.0], 0.25, v.K_max + 1)
    assert terms.sum() == pytest.approx(v.tail, rel=1e-12)


def test_counting_constant_in_the_plane():
    assert counting_constant(2) == pytest.approx(math.pi * (2 + 2 * math.sqrt(2)) ** 2)
    assert counting_constant(2) == pytest.approx(73.2421753483, rel=1e-10)


def test_kappa_forms_coincide_only_for_p_two():
    ex = derive_exponents(CANONICAL)
    k = kappa_choice(CANONICAL, ex, 2903.77, 1.0)
    assert not k["kappa0_forms_differ"]
    assert k["kappa"] == min(k["kappa0"], k["kappa1"], k["kappa2"])
    prm = CANONICAL.replace(p=3.0, q=3.0, s=0.6, t=0.5, eps=0.05)
    k3 = kappa_choice(prm, derive_exponents(prm), 2903.77, 1.0)
    assert k3["kappa0_forms_differ"]
    assert k3["kappa0"] == min(k3["kappa0_pprime_form"], k3["kappa0_p_form"])


def test_kappa_hat_sits_on_its_boundary():
    meas = {"c_ball": 9.1, "C_d": 2903.77, "C_nd": 1.0, "C_dd": 10.7, "C_ddd": 27.2}
    led = constants_ledger(CANONICAL, meas)
    ex = derive_exponents(CANONICAL)
    pl, th, pp, eps = ex.p_lower_s, ex.theta, ex.p_prime, CANONICAL.eps
    val = (4 * led.M_big * (led.L + 1) * led.kappa_hat / eps ** (1 / pl - 1 / pp)) ** (pl / (1 - pl * th))
    assert val == pytest.approx(0.5, rel=1e-12)
    assert 0 < led.kappa_f < 1
    assert led.M_big == 4.0
    with pytest.raises(KeyError):
        constants_ledger(CANONICAL, {"c_ball": 1.0})


@given(st.floats(0.01, 0.3), st.integers(0, 5))
def test_radius_lattice(lower, m):
    upper = lower * 2**m * 1.5
    radii = radius_lattice(lower, upper)
    assert radii == sorted(radii)
    assert radii[0] == pytest.approx(lower)
    assert radii[-1] == pytest.approx(upper)


def test_thresholds_are_ordered(kern16):
    ev = FunctionalEvaluator(kern16)
    th = thresholds(ev, RELAXED, 1e-3, M_big=4.0)
    assert th.lambda2 >= th.lambda1 > 0
    assert th.lambda0 > 0
    assert th.sites > 0
    with pytest.raises(ValueError):
        thresholds(ev, RELAXED, 2.0)
