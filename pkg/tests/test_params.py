import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualpair.params import (
    CANONICAL,
    AssumptionViolation,
    ParameterSet,
    check_assumptions,
    conjugate,
    derive_exponents,
    geometric_series_bound,
    sobolev_lower,
    sobolev_upper,
)


def exact_exponents(n, p, s, eps, delta_f):
    """Rational-arithmetic oracle for the derived exponents."""
    n, p, s, eps, delta_f = (Fraction(str(v)) for v in (n, p, s, eps, delta_f))
    pp = p / (p - 1)
    eta = (n * p + eps * p * p) / (n + s * p + eps * p)
    gamma = eta / (p - 1)
    theta = (s - eps * (p - 1)) / (n + eps * p)
    tau = s + eps - eps * p / eta
    p_low = n * pp / (n + s * pp)
    vt = 3 * (pp - gamma) / gamma
    r = p_low * theta
    vt_f = (p_low + delta_f) * r / (1 - r)
    vt_ft = p_low * (1 + theta * delta_f) / (1 - r)
    return dict(eta=eta, gamma=gamma, theta=theta, tau=tau, p_lower_s=p_low,
                vartheta=vt, vartheta_f=vt_f, vartheta_f_tilde=vt_ft)


def test_canonical_exponents_match_rational_oracle():
    ex = derive_exponents(CANONICAL)
    oracle = exact_exponents(2, 2, 0.6, 0.1, 0.05)
    for key, val in oracle.items():
        assert getattr(ex, key) == pytest.approx(float(val), rel=1e-13), key


def test_canonical_rounded_values():
    ex = derive_exponents(CANONICAL)
    assert round(ex.eta, 6) == 1.294118
    assert round(ex.gamma, 6) == 1.294118
    assert round(ex.theta, 6) == 0.227273
    assert round(ex.tau, 6) == 0.545455
    assert ex.p_star_s == pytest.approx(5.0)
    assert ex.p_lower_s == pytest.approx(1.25)
    assert round(ex.vartheta, 6) == 1.636364
    assert round(ex.vartheta_f, 6) == 0.515873
    assert round(ex.vartheta_f_tilde, 6) == 1.765873
    assert ex.alpha_k_rate == pytest.approx(0.3)


def test_alpha_series_closed_form():
    rate = derive_exponents(CANONICAL).alpha_k_rate
    partial = math.fsum(2.0 ** (-k * rate) for k in range(2000))
    assert partial == pytest.approx(1 / (1 - 2**-rate), rel=1e-12)
    assert partial == pytest.approx(5.32629967, rel=1e-8)


def test_conjugate_and_sobolev():
    assert conjugate(2.0) == 2.0
    assert conjugate(3.0) == 1.5
    with pytest.raises(ValueError):
        conjugate(1.0)
    assert sobolev_upper(2.0, 0.6, 2) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        sobolev_upper(2.0, 1.0, 2)


@given(
    n=st.integers(1, 4),
    r=st.floats(1.05, 6.0),
    sigma=st.floats(0.01, 0.99),
)
def test_sobolev_exponents_are_conjugate(n, r, sigma):
    if sigma * r >= n:
        return
    assert conjugate(sobolev_upper(r, sigma, n)) == pytest.approx(sobolev_lower(r, sigma, n), rel=1e-12)


def test_canonical_passes_every_gate():
    rep = check_assumptions(CANONICAL)
    assert rep.passed
    assert rep.warnings == ()


@pytest.mark.parametrize(
    "change, gate",
    [
        ({"p": 1.0}, "A2.p_gt_1"),
        ({"q": 1.5}, "A2.p_le_q"),
        ({"t": 0.7}, "A2.t_le_s"),
        ({"s": 1.0}, "A2.s_lt_1"),
        ({"t": 0.2}, "A2.ratio_window"),
        ({"n": 1}, "A3.sp_lt_n"),
        ({"eps": 0.0}, "A4.eps_pos"),
        ({"eps": 0.35}, "A4.eps_lt_s_over_p"),
        ({"eps": 0.25}, "A4.eps_lt_ratio_gap"),
        ({"delta_f": 0.2}, "data.delta_f_lt_delta0"),
    ],
)
def test_single_perturbations_break_their_gate(change, gate):
    rep = check_assumptions(CANONICAL.replace(**change))
    assert not rep.gate(gate).passed
    with pytest.raises(AssumptionViolation):
        derive_exponents(CANONICAL.replace(**change))


def test_low_dimension_warns():
    rep = check_assumptions(ParameterSet(n=1, p=2.0, q=2.0, s=0.4, t=0.35, eps=0.05, enforce_a3=True))
    assert rep.warnings
    assert rep.passed


def test_delta_f_defaults_to_half_delta0():
    prm = ParameterSet(n=2, p=2.0, q=2.0, s=0.6, t=0.5, eps=0.1, delta0=0.2)
    assert prm.delta_f == 0.1


admissible = st.builds(
    lambda n, p, qf, s, tf, ef: (n, p, p * qf, s, s * tf, ef),
    st.integers(2, 4), st.floats(2.0, 5.0), st.floats(1.0, 1.3),
    st.floats(0.05, 0.95), st.floats(0.3, 1.0), st.floats(0.01, 0.99),
)


@settings(max_examples=200)
@given(admissible)
def test_exponent_identities_hold_on_admissible_sets(raw):
    n, p, q, s, t, ef = raw
    if s * p >= n:
        return
    ratio = t * q / (s * p)
    upper = min(s / p, 1 - s, s * (ratio - (p - 1) / p))
    if upper <= 0 or ratio > 1:
        return
    prm = ParameterSet(n=n, p=p, q=q, s=s, t=t, eps=upper * ef)
    if not check_assumptions(prm).passed:
        return
    ex = derive_exponents(prm)
    eps = prm.eps
    pp = conjugate(p)
    assert ex.gamma == pytest.approx(pp * (n + eps * p) / (n + s * p + eps * p), rel=1e-12)
    assert ex.tau + eps * p / ex.eta == pytest.approx(s + eps, abs=1e-12)
    assert ex.p_lower_s * ex.theta < p / (p + 1)
    assert ex.gamma < pp


def test_theta_window_needs_p_at_least_two():
    # admissible apart from p >= 2, and the window closes
    prm = ParameterSet(n=2, p=1.203125, q=1.203125, s=0.5, t=0.25, eps=0.0)
    upper = min(prm.s / prm.p, 1 - prm.s, prm.s * (0.5 - (prm.p - 1) / prm.p))
    prm = prm.replace(eps=upper / 2)
    assert check_assumptions(prm).passed
    ex = derive_exponents(prm)
    assert ex.p_lower_s * ex.theta > prm.p / (prm.p + 1)
    assert ex.p_lower_s * ex.theta < 1


@given(st.integers(1, 10), st.floats(0.1, 5.0))
def test_geometric_series_lhs_is_the_series(k, r):
    lhs, rhs = geometric_series_bound(k, r)
    series = 2.0 ** (k * r) * math.fsum(2.0 ** (-j * r) for j in range(k - 1, k + 400))
    assert lhs == pytest.approx(series, rel=1e-9)
    assert lhs <= rhs


def test_geometric_series_rejects_bad_input():
    with pytest.raises(ValueError):
        geometric_series_bound(0, 1.0)
    with pytest.raises(ValueError):
        geometric_series_bound(1, 0.0)
