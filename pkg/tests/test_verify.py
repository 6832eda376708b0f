import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualpair.dyadic import DyadicCube, Geometry, ProductCube
from dualpair.fields import PairKernel, constants_ledger
from dualpair.grid import Grid, make_catalog_function
from dualpair.params import CANONICAL
from dualpair.pipeline import (
    LevelSetRun,
    build_H_lambda,
    classify_cubes,
    exit_cover,
    partition_bad_families,
    root_threshold,
)
from dualpair.verify import (
    _record,
    arh_sides,
    check_arh_corollary,
    check_arh_sup,
    check_dual_embedding,
    check_level_set,
    check_offdiag_arh,
    check_poincare_family,
    check_sums,
    evaluate_rh_sides,
    fitted_constant,
    flag_record,
    off_diagonal_cubes,
    pipeline_records,
)

RELAXED = Geometry((0.0, 0.0), 0.35, 0.4, 0.5, chi=0.25, ball_factor=3.0)
MEAS = {"c_ball": 9.1, "C_d": 2903.77, "C_nd": 1.0, "C_dd": 10.7, "C_ddd": 27.2}


@pytest.fixture(scope="module")
def run():
    grid = Grid.symmetric(2, 16)
    return LevelSetRun(PairKernel(CANONICAL, make_catalog_function("trig-random", grid, seed=0)), RELAXED)


def test_fitted_constant():
    assert fitted_constant(0.0, 0.0) == 0.0
    assert fitted_constant(2.0, 4.0) == 0.5
    assert fitted_constant(1.0, 0.0) == math.inf


def test_record_modes():
    assert _record("x", "a", 1.0, 2.0, mode="bound").passed
    assert not _record("x", "a", 3.0, 2.0, mode="bound").passed
    assert _record("x", "a", 3.0, 2.0).passed
    assert not _record("x", "a", 3.0, 0.0).passed
    with pytest.raises(ValueError):
        _record("x", "a", 1.0, 1.0, mode="other")
    assert flag_record("y", "b", True).fitted == 0.0
    assert not flag_record("y", "b", False).passed


def test_poincare_family_finite():
    grid = Grid.symmetric(2, 16)
    u = make_catalog_function("bump", grid)
    recs = check_poincare_family(u, (0.0, 0.0), 0.5, 0.6, 2.0, params=CANONICAL)
    assert [r.check_id for r in recs] == ["poincare", "poincare_sobolev", "dual_pair_embedding"]
    assert all(r.passed and math.isfinite(r.fitted) for r in recs)
    with pytest.raises(ValueError):
        check_poincare_family(u, (0.0, 0.0), 0.5, 0.6, 4.0)


def test_dual_embedding_constant_is_zero():
    grid = Grid.symmetric(2, 16)
    kern = PairKernel(CANONICAL, make_catalog_function("constant", grid, c=1.0))
    rec = check_dual_embedding(kern, (0.0, 0.0), 0.5)
    assert rec.lhs == 0.0 and rec.fitted == 0.0 and rec.passed


def test_off_diagonal_cubes_are_separated(run):
    cubes = off_diagonal_cubes(run)
    assert len(cubes) > 0
    t = arh_sides(run, cubes)
    assert np.all(t["dist"] >= cubes.side() - 1e-15)
    assert np.all(np.isfinite(t["fitted"]))
    # Jensen: the H^gamma average never beats the H^{p'} average
    assert np.all(t["local"] <= t["lhs"] * (1 + 1e-9) + 1e-300)


def test_single_cube_matches_vector_form(run):
    cubes = off_diagonal_cubes(run, levels=[3])
    k, a, b = cubes.keys()[7]
    rec = check_offdiag_arh(run, ProductCube(DyadicCube(RELAXED.x0, k, a), DyadicCube(RELAXED.x0, k, b)))
    t = arh_sides(run, cubes)
    assert rec.lhs == pytest.approx(t["lhs"][7])
    assert rec.rhs == pytest.approx(t["rhs_unit"][7])
    with pytest.raises(ValueError):
        check_offdiag_arh(run, ProductCube(DyadicCube((0.1, 0.0), k, a), DyadicCube((0.1, 0.0), k, b)))


def test_arh_sup(run):
    rec = check_arh_sup(run)
    assert rec.passed
    assert rec.terms["jensen_ok"]
    assert 0 < rec.fitted < math.inf


def test_arh_corollary(run):
    lam = 1.1 * root_threshold(run)
    rec = check_arh_corollary(run, lam, 1e-3, check_arh_sup(run).fitted)
    assert rec.passed


def test_sums_and_pipeline_records(run):
    lam = 1.1 * root_threshold(run)
    led = constants_ledger(CANONICAL, {**MEAS, "C_nd": check_arh_sup(run).fitted})
    kappa = led.kappa["kappa"]
    hl = build_H_lambda(run, lam)
    cover = exit_cover(run, lam, kappa, led.M_big)
    fam = classify_cubes(hl, cover, run, lam, kappa)
    bad = partition_bad_families(fam, run, led.C_n)
    recs = {r.check_id: r for r in check_sums(run, fam, cover, bad, led, lam, lam1=10 * lam)}
    assert recs["sum_good"].passed
    assert recs["offdiag_conclusion"].passed
    assert recs["dilated_ball_sum"].diagnostic
    assert recs["sum_diagonal"].diagnostic
    pr = {r.check_id: r for r in pipeline_records(run, hl, cover, fam, bad, relaxed=True)}
    for key in ("cz_family", "vitali_disjoint", "vitali_cover", "family_partition", "near_diagonal_cover", "cardinality"):
        assert pr[key].passed, key
    assert pr["ten_dilations_inside_alpha"].diagnostic
    with pytest.raises(ValueError):
        check_sums(run, fam, cover, bad, led, 2 * lam)


def test_level_set_trivial_regime(run):
    led = constants_ledger(CANONICAL, MEAS)
    top = float(run.Hmat.max()) * 2
    recs, rows = check_level_set(run, [top], led, 1.0)
    assert rows[0]["lhs"] == 0 and rows[0]["trivial"]
    assert recs[0].terms["regime"] == "trivial"
    assert recs[0].passed and recs[0].diagnostic


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 3.0))
def test_level_set_lhs_decreases_in_lambda(run, factor):
    led = constants_ledger(CANONICAL, MEAS)
    lam = factor * root_threshold(run)
    _, rows = check_level_set(run, [lam, 1.5 * lam], led, 1.0)
    a, b = rows
    assert b["lhs"] * (1.5 * lam) ** 2 <= a["lhs"] * lam**2 * (1 + 1e-12)


def test_rh_sides_report_only():
    grid = Grid.symmetric(2, 32)
    kern = PairKernel(CANONICAL, make_catalog_function("bump", grid))
    rec = evaluate_rh_sides(kern, (0.0, 0.0), 0.35, 0.01)
    assert rec.diagnostic
    assert rec.terms["tail_remainder"] >= 0
    assert rec.lhs > 0 and rec.rhs > 0


def test_rh_sides_unresolved_inner_ball():
    grid = Grid.symmetric(2, 16)
    kern = PairKernel(CANONICAL, make_catalog_function("bump", grid))
    rec = evaluate_rh_sides(kern, (0.0, 0.0), 0.35, 0.01)
    assert rec.terms == {"unresolved": True}
