"""Both sides of every checked inequality, minimal fitted constants and report records.

A record's fitted constant is the smallest C with lhs <= C * rhs on the data
(0 when lhs vanishes, inf when rhs does but lhs does not).  Records flagged
``diagnostic`` are reported but never decide the exit status.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dyadic import ProductCube
from .fields import (
    ConstantsLedger,
    PairKernel,
    PairRegion,
    gagliardo_seminorm,
)
from .grid import GridFunction
from .measure import NuMeasure, sphere_area
from .params import sobolev_upper
from .pipeline import (
    BAD_ND,
    GOOD,
    BadIndex,
    Cover,
    CubeArray,
    CubeFamilies,
    LevelSetRun,
    factor_gap,
)


@dataclass(frozen=True)
class CheckRecord:
    check_id: str
    anchor: str
    lhs: float
    rhs: float
    fitted: float
    passed: bool
    diagnostic: bool = False
    tolerance: str = "finite"
    terms: dict = field(default_factory=dict)
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def fitted_constant(lhs: float, rhs: float) -> float:
    if lhs <= 0:
        return 0.0
    if rhs > 0:
        return lhs / rhs
    return math.inf


def _record(check_id, anchor, lhs, rhs, *, mode="finite", diagnostic=False, terms=None, context=None) -> CheckRecord:
    """``mode="finite"``: pass iff the fitted constant is finite; ``"bound"``: pass iff lhs <= rhs."""
    lhs, rhs = float(lhs), float(rhs)
    fit = fitted_constant(lhs, rhs)
    if mode == "finite":
        ok = math.isfinite(fit)
    elif mode == "bound":
        ok = lhs <= rhs * (1 + 1e-12)
    else:
        raise ValueError(mode)
    return CheckRecord(check_id, anchor, lhs, rhs, fit, bool(ok), diagnostic, mode, terms or {}, context or {})


def flag_record(check_id, anchor, ok: bool, *, diagnostic=False, terms=None, context=None) -> CheckRecord:
    """Record for a yes/no property (lhs = 1 on failure, rhs = 0)."""
    return CheckRecord(check_id, anchor, 0.0 if ok else 1.0, 0.0, 0.0 if ok else math.inf, bool(ok), diagnostic, "property", terms or {}, context or {})


# ------------------------------------------------------------ Poincaré family


def check_poincare_family(u: GridFunction, center, radius: float, sobolev_order: float, r: float, params=None) -> list[CheckRecord]:
    """Poincaré, Poincaré–Sobolev and (given ``params``) the dual-pair embedding on one ball."""
    grid = u.grid
    n = grid.n
    if not 0 < sobolev_order < 1 or r < 1:
        raise ValueError("need 0 < sigma < 1 and r >= 1")
    if sobolev_order * r >= n:
        raise ValueError("the Sobolev form needs sigma r < n")
    if not grid.ball_inside(center, radius):
        raise ValueError("ball leaves the grid box")
    mask = grid.cells_in_ball(center, radius)
    vals = u.flat()[mask]
    vol = mask.sum() * grid.h**n
    dev = np.abs(vals - vals.mean())
    semi = gagliardo_seminorm(u, sobolev_order, r, mask)
    rhs = (semi / vol) ** (1 / r)
    ctx = {"center": [float(c) for c in center], "radius": radius, "sigma": sobolev_order, "r": r, "function": u.name}
    r_star = sobolev_upper(r, sobolev_order, n)
    out = [
        _record("poincare", "fractional Poincare", np.mean(dev**r) ** (1 / r) / radius**sobolev_order, rhs, context=ctx),
        _record(
            "poincare_sobolev", "fractional Poincare-Sobolev",
            np.mean(dev**r_star) ** (1 / r_star) / radius**sobolev_order, rhs,
            terms={"r_star": r_star}, context=ctx,
        ),
    ]
    if params is not None:
        kern = PairKernel(params, u)
        out.append(check_dual_embedding(kern, center, radius))
    return out


def check_dual_embedding(kern: PairKernel, center, radius: float) -> CheckRecord:
    """(avg_B |u - u_B|^p)^{1/p} against R^{s+eps} eps^{-1/eta} (avg U^eta dnu)^{1/eta}."""
    prm, ex, grid = kern.params, kern.exps, kern.grid
    mask = grid.cells_in_ball(center, radius)
    vals = kern.u.flat()[mask]
    lhs = np.mean(np.abs(vals - vals.mean()) ** prm.p) ** (1 / prm.p)
    integral = kern.difference_integral(ex.eta, ex.tau, mask, route="nu")
    mass = float(np.sum(kern.W[np.ix_(mask, mask)]))
    avg = integral / mass
    rhs = radius ** (prm.s + prm.eps) / prm.eps ** (1 / ex.eta) * avg ** (1 / ex.eta)
    return _record(
        "dual_pair_embedding", "Sobolev embedding for the dual pair", lhs, rhs,
        terms={"avg_U_eta": avg, "eta": ex.eta},
        context={"center": [float(c) for c in center], "radius": radius, "function": kern.u.name},
    )


# ------------------------------------------------------ off-diagonal reverse Hölder


def off_diagonal_cubes(run: LevelSetRun, levels=None) -> CubeArray:
    """All product cubes below the roots whose factors are at least one side apart."""
    n = run.n
    roots = np.array([c.index for c in run.roots], dtype=int).reshape(-1, n)
    levels = range(run.k0, run.kg + 1) if levels is None else levels
    lv, z1s, z2s = [], [], []
    for k in levels:
        d = k - run.k0
        sub = np.array(np.meshgrid(*[np.arange(2**d)] * n, indexing="ij")).reshape(n, -1).T
        fac = (roots[:, None, :] * 2**d + sub[None, :, :]).reshape(-1, n)
        a = np.repeat(fac, len(fac), axis=0)
        b = np.tile(fac, (len(fac), 1))
        gap2 = np.sum(np.maximum(np.abs(a - b) - 1, 0) ** 2, axis=1)
        keep = gap2 >= 1
        lv.append(np.full(int(keep.sum()), k))
        z1s.append(a[keep])
        z2s.append(b[keep])
    if not lv:
        return CubeArray.empty(n)
    return CubeArray(np.concatenate(lv), np.concatenate(z1s), np.concatenate(z2s))


def arh_sides(run: LevelSetRun, cubes: CubeArray) -> dict:
    """Per cube: lhs, the two right-side groups at unit constant and the decay factor."""
    prm, ex = run.params, run.exps
    side = cubes.side()
    dist = factor_gap(cubes.z1, cubes.z2, side)
    if np.any(dist < side * (1 - 1e-12)):
        raise ValueError("reverse Holder check needs factors at least one side apart")
    lhs = run.averages(run.hp_pyr, cubes) ** (1 / ex.p_prime)
    local = run.averages(run.hg_pyr, cubes) ** (1 / ex.gamma)
    p1 = run.averages(run.hg_pyr, cubes, 1) ** (1 / ex.gamma)
    p2 = run.averages(run.hg_pyr, cubes, 2) ** (1 / ex.gamma)
    decay = (side / dist) ** ((prm.p - 1) * (prm.s + prm.eps))
    rhs = local + decay * (p1 + p2) / prm.eps ** (1 / ex.gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        fit = np.where(lhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
        fit = np.where((lhs > 0) & (rhs <= 0), np.inf, fit)
    return {"lhs": lhs, "local": local, "proj1": p1, "proj2": p2, "decay": decay, "rhs_unit": rhs, "fitted": fit, "dist": dist}


def check_offdiag_arh(run: LevelSetRun, cube: ProductCube) -> CheckRecord:
    """Single-cube form of the off-diagonal reverse Hölder check."""
    if cube.K1.anchor != run.geometry.x0 or cube.K2.anchor != run.geometry.x0:
        raise ValueError("cube lattice is not anchored at x0")
    arr = CubeArray(np.array([cube.level]), np.array([cube.K1.index]), np.array([cube.K2.index]))
    t = arh_sides(run, arr)
    return _record(
        "offdiag_arh_cube", "off-diagonal almost reverse Holder",
        t["lhs"][0], t["rhs_unit"][0],
        terms={k: float(v[0]) for k, v in t.items() if k not in ("lhs", "rhs_unit", "fitted")},
        context={"level": cube.level, "K1": list(cube.K1.index), "K2": list(cube.K2.index)},
    )


def check_arh_sup(run: LevelSetRun, levels=None) -> CheckRecord:
    """sup over all off-diagonal cubes of the fitted constant; also the Jensen ordering."""
    cubes = off_diagonal_cubes(run, levels)
    t = arh_sides(run, cubes)
    fit = t["fitted"]
    i = int(np.argmax(fit)) if len(fit) else -1
    jensen = bool(np.all(t["local"] <= t["lhs"] * (1 + 1e-9) + 1e-300))
    ctx = {"cubes": len(cubes), "levels": [int(run.k0), int(run.kg)], "function": run.kernel.u.name}
    if i >= 0:
        k, a, b = cubes.keys()[i]
        ctx.update({"argmax_level": k, "argmax_K1": list(a), "argmax_K2": list(b)})
    sup = float(fit[i]) if i >= 0 else 0.0
    return CheckRecord(
        "offdiag_arh_sup", "off-diagonal almost reverse Holder", float(t["lhs"][i]) if i >= 0 else 0.0,
        float(t["rhs_unit"][i]) if i >= 0 else 0.0, sup, bool(math.isfinite(sup) and jensen), False, "finite",
        {"jensen_ok": jensen, "C_nd_sup": sup}, ctx,
    )


def check_arh_corollary(run: LevelSetRun, lam: float, kappa: float, C_nd: float, levels=None) -> CheckRecord:
    """Measure form: nu(K) against the level-set-restricted integrals, for cubes with lhs >= lambda."""
    prm, ex = run.params, run.exps
    g = ex.gamma
    cubes = off_diagonal_cubes(run, levels)
    t = arh_sides(run, cubes)
    sel = t["lhs"] >= lam
    cubes = cubes.subset(sel)
    pyr = run.restricted_pyramid("Hg", "H", kappa * lam)
    nu = run.block_sums(run.w_pyr, cubes)
    own = run.block_sums(pyr, cubes)
    coef = 3**g * C_nd**g / lam**g
    decay = t["decay"][sel] ** g  # (2^-k/dist)^{eta (s+eps)}
    far = np.zeros(len(cubes))
    for h in (1, 2):
        far += nu / run.block_sums(run.w_pyr, cubes, h) * run.block_sums(pyr, cubes, h)
    rhs = coef * own + coef / prm.eps * decay * far
    ok = nu <= rhs * (1 + 1e-12)
    worst = float(np.max(nu / np.where(rhs > 0, rhs, np.nan), initial=0.0)) if len(nu) and np.any(rhs > 0) else 0.0
    return CheckRecord(
        "offdiag_arh_measure_form", "off-diagonal level-set estimate",
        float(nu.sum()), float(rhs.sum()), worst, bool(ok.all()), False, "bound",
        {"cubes_checked": len(cubes), "violations": int((~ok).sum()), "kappa": kappa, "C_nd": C_nd},
        {"lambda": lam},
    )


# ------------------------------------------------------------------- sums


def check_sums(
    run: LevelSetRun, fam: CubeFamilies, cover: Cover, bad: BadIndex, ledger: ConstantsLedger,
    lam: float, lam1: float | None = None,
) -> list[CheckRecord]:
    prm, ex = run.params, run.exps
    s, eps = prm.s, prm.eps
    g, pp = ex.gamma, ex.p_prime
    kappa = fam.kappa
    if abs(fam.lam - lam) > 1e-12 * lam or abs(cover.lam - lam) > 1e-12 * lam:
        raise ValueError("families and cover were built for a different lambda")
    alpha, beta = run.geometry.alpha, run.geometry.beta
    ctx = {"lambda": lam, "kappa": kappa, "function": run.kernel.u.name}
    I_alpha = run.level_set_integral("Hg", alpha, "H", kappa * lam)
    C_nd = ledger.C_nd
    out = []

    good = fam.family(GOOD)
    good_sum = float(run.block_sums(run.w_pyr, good).sum())
    out.append(_record(
        "sum_good", "first off-diagonal estimate", good_sum, 6**g * C_nd**g / lam**g * I_alpha, mode="bound",
        terms={"count": len(good), "integral_alpha": I_alpha, "C_nd": C_nd}, context=ctx,
    ))

    hard = fam.family(BAD_ND)
    hard_nu = run.block_sums(run.w_pyr, hard)
    out.append(_record(
        "sum_hard", "second off-diagonal estimate", float(hard_nu.sum()), I_alpha / lam**g,
        terms={"count": len(hard), "integral_alpha": I_alpha}, context=ctx,
    ))

    # Step 2: per (h, M) family of bad cubes whose h-projection lies in M
    pyr = run.restricted_pyramid("Hg", "H", kappa * lam)
    worst, worst_key, groups = 0.0, None, {}
    for e in bad.entries:
        groups.setdefault((e["h"], e["M"]), []).append(e)
    for (h, M), items in sorted(groups.items()):
        idx = np.array([e["cube"] for e in items])
        cubes = fam.cubes.subset(idx)
        side = cubes.side()
        dist = np.array([e["dist"] for e in items])
        nu = run.block_sums(run.w_pyr, cubes)
        nu_proj = run.block_sums(run.w_pyr, cubes, h)
        proj_int = run.block_sums(pyr, cubes, h)
        lhs = float(np.sum(nu / nu_proj * (side / dist) ** (ex.eta * (s + eps)) * proj_int)) / eps
        km, zm = M
        Marr = CubeArray(np.array([km]), np.array([zm]), np.array([zm]))
        rhs = float(run.block_sums(pyr, Marr)[0]) / s**2
        fit = fitted_constant(lhs, rhs)
        if fit > worst or worst_key is None:
            worst, worst_key = fit, (h, M)
    out.append(CheckRecord(
        "sum_step2", "bad cubes grouped by problem cube", 0.0, 0.0, worst, math.isfinite(worst), False, "finite",
        {"groups": len(groups), "worst_group": str(worst_key)}, ctx,
    ))

    nu_balls = cover.checks["sum_nu_balls"]
    lhs = run.level_set_integral("Hp", beta, "H", lam)
    factor = max(cover.checks["dilated_sum_factor_eps"], cover.checks["dilated_sum_factor_p"])
    known = factor * kappa**pp * lam**pp * nu_balls
    unit = lam ** (pp - g) * I_alpha
    rec = _record(
        "offdiag_conclusion", "off-diagonal conclusion", max(lhs - known, 0.0), unit,
        terms={"lhs": lhs, "ball_term": known, "unit_term": unit, "sum_nu_balls": nu_balls, "ball_factor": factor},
        context=ctx,
    )
    out.append(rec)

    eq7_diag = lam1 is None or lam < lam1
    out.append(_record(
        "dilated_ball_sum", "exit-time bound on dilated balls",
        cover.checks["dilated_sum_lhs"], cover.checks["dilated_sum_rhs"], mode="bound", diagnostic=eq7_diag,
        terms={"lambda1": lam1}, context=ctx,
    ))

    # diagonal sum: needs u to solve the equation, so it is report-only
    th = ex.vartheta_f
    I_t = run.level_set_integral("Hg", alpha, "H", ledger.kappa_tilde * kappa * lam)
    I_f = run.level_set_integral("Fp", alpha, "F", ledger.kappa_hat * kappa * lam)
    T_H = I_t / (eps ** (2 - 2 * g / pp) * kappa**g * lam**g)
    lam1_eff = lam1 if lam1 is not None else 0.0
    T_F = ledger.C5 * lam1_eff**th / (ledger.kappa_hat * kappa * lam) ** ex.vartheta_f_tilde * I_f
    C4 = max(nu_balls - T_F, 0.0) / T_H if T_H > 0 else (0.0 if nu_balls <= T_F else math.inf)
    out.append(CheckRecord(
        "sum_diagonal", "diagonal ball sum", nu_balls, T_H + T_F, C4, math.isfinite(C4), True, "finite",
        {"H_term_unit": T_H, "F_term": T_F, "C4_fitted": C4}, ctx,
    ))
    return out


def pipeline_records(run: LevelSetRun, hl, cover: Cover, fam: CubeFamilies, bad: BadIndex, relaxed: bool) -> list[CheckRecord]:
    """Structural audits of one pipeline pass as pass/fail records."""
    ctx = {"lambda": fam.lam, "kappa": fam.kappa, "function": run.kernel.u.name}
    c, v, f, b = hl.checks, cover.checks, fam.checks, bad.checks
    cz_ok = c["disjoint"] and c["lower_bound_ok"] and c["predecessor_bound_ok"] and c["outside_bound_ok"]
    max_ratio = b["max_count_over_2^{n(i+j)}"]
    return [
        flag_record("cz_family", "Calderon-Zygmund stopping family", cz_ok, terms=c, context=ctx),
        flag_record("vitali_disjoint", "disjoint 2-dilations", v["two_dilations_disjoint"], context=ctx),
        flag_record("vitali_cover", "5-fold Vitali cover", v["vitali_cover_ok"] and v["exit_condition_on_lattice"], terms={k: v[k] for k in ("balls", "exit_points")}, context=ctx),
        flag_record("ten_dilations_inside_alpha", "10-dilations inside B(x0, alpha)", v["ten_dilations_inside_alpha"], diagnostic=relaxed, context=ctx),
        flag_record("family_partition", "disjoint cube families", f["partition_exact"] and f["nd_predecessor_distance_ok"] and f["symmetry_ok"], terms=f, context=ctx),
        flag_record("near_diagonal_cover", "near-diagonal cubes inside the dilated balls", f["near_diagonal_covered"], context=ctx),
        flag_record("combinatorial_lemma", "projection inside M forces distance", b["combinatorial_lemma_ok"], diagnostic=relaxed, context=ctx),
        _record("cardinality", "bad cubes per (i, j, m)", max_ratio, b["cardinality_constant"], mode="bound", terms=b, context=ctx),
    ]


# ---------------------------------------------------------- side evaluators


def evaluate_rh_sides(kern: PairKernel, center, radius: float, sigma_rh: float, terms: int | None = None) -> CheckRecord:
    """Both sides of the local reverse Hölder inequality at unit constants; report-only."""
    prm, ex, grid = kern.params, kern.exps, kern.grid
    if radius > 1 or not 0 < sigma_rh < 1:
        raise ValueError("need radius <= 1 and 0 < sigma < 1")
    if not grid.ball_inside(center, radius):
        raise ValueError("ball leaves the grid box")
    n, p, q, s, t, eps = prm.n, prm.p, prm.q, prm.s, prm.t, prm.eps
    quarter = PairRegion.diagonal_ball(grid, center, radius / 4)
    context = {"center": [float(c) for c in center], "radius": radius, "function": kern.u.name}
    if kern.mass(quarter) <= 0:
        # the inner ball holds no cell centre: nothing to evaluate at this resolution
        return CheckRecord("reverse_holder_sides", "local reverse Holder (side evaluation)", 0.0, 0.0, 0.0,
                           True, True, "report", {"unresolved": True}, context)
    g_avg = kern.nu_average("G", 1.0, quarter)
    lhs_G = g_avg ** (1 / p)
    lhs_H = g_avg ** (1 / ex.p_prime)
    full = PairRegion.diagonal_ball(grid, center, radius)
    local = kern.nu_average("U", ex.eta, full) ** (1 / ex.eta)

    # tail series: discrete averages while the ball stays in the box, then the
    # bound int U^eta <= I_inf over the exact ball mass, then a closed-form remainder
    measure = NuMeasure(prm)
    c_ball = measure.ball_constant()
    r1 = s * p / (p - 1) - s - eps
    r2 = t * q / (p - 1) - s - eps
    if min(r1, r2) <= 0:
        raise ValueError("tail weights do not decay")
    U_eta = kern.U**ex.eta * kern.W
    box_total = float(U_eta.sum())
    d = grid.distance_to_outside()

    tau_eta = ex.tau * ex.eta
    exterior = 2 * grid.h**n * sphere_area(n) * float(np.sum(kern.u.exterior_jump() ** ex.eta * d**-tau_eta)) / tau_eta
    I_inf = box_total + exterior
    weights, avgs, bounded = [], [], []
    k = 0
    limit = terms if terms is not None else 64
    while k < limit:
        R = 2**k * radius
        w = 2.0 ** (-k * r1) + 2.0 ** (-k * r2)
        if grid.ball_inside(center, R):
            avgs.append(kern.nu_average("U", ex.eta, PairRegion.diagonal_ball(grid, center, R)) ** (1 / ex.eta))
            bounded.append(False)
        else:
            avgs.append((I_inf * eps / (c_ball * R ** (n + eps * p))) ** (1 / ex.eta))
            bounded.append(True)
        weights.append(w)
        k += 1
        if terms is None and bounded[-1] and k >= 4:
            break
    series = float(np.dot(weights, avgs))
    # remainder: avg over 2^k B is at most (I_inf / nu(2^k B))^{1/eta}, decaying geometrically
    K = len(weights)
    decay = 2.0 ** (-(n + eps * p) / ex.eta)
    base = (I_inf * eps / (c_ball * (2**K * radius) ** (n + eps * p))) ** (1 / ex.eta)
    remainder = base * (2.0 ** (-K * r1) / (1 - 2.0**-r1 * decay) + 2.0 ** (-K * r2) / (1 - 2.0**-r2 * decay))
    lead = 1 / eps ** (1 / ex.eta - 1 / p)
    F_avg = kern.nu_average("F", ex.p_lower_s, full) if kern.f is not None else 0.0
    nu_B = kern.mass(full)
    f_term = (eps * nu_B) ** (ex.theta / (p - 1)) / eps ** ((1 / ex.p_lower_s - 1 / ex.p_prime) / (p - 1)) * (
        F_avg ** (1 / ex.p_lower_s)
    ) ** (1 / (p - 1))
    rhs = lead * (local / sigma_rh + sigma_rh * (series + remainder)) + f_term
    return CheckRecord(
        "reverse_holder_sides", "local reverse Holder (side evaluation)", lhs_G, rhs, fitted_constant(lhs_G, rhs),
        True, True, "report",
        {
            "lhs_G": lhs_G, "lhs_H": lhs_H, "local": local, "tail_series": series, "tail_remainder": remainder,
            "tail_terms": K, "tail_bounded_terms": int(sum(bounded)), "F_term": f_term, "sigma_rh": sigma_rh,
        },
        context,
    )


def check_level_set(run: LevelSetRun, lambdas, ledger: ConstantsLedger, lam0: float) -> tuple[list[CheckRecord], list[dict]]:
    """Level-set estimate per lambda (report-only) and the plot table."""
    prm, ex = run.params, run.exps
    alpha, beta = run.geometry.alpha, run.geometry.beta
    pp, g, eps = ex.p_prime, ex.gamma, prm.eps
    records, rows = [], []
    for lam in lambdas:
        lhs = run.level_set_integral("Hp", beta, "H", lam) / lam**pp
        T1 = run.level_set_integral("Hg", alpha, "H", lam) / (eps**ex.vartheta * lam**g)
        T2 = lam0**ex.vartheta_f / lam**ex.vartheta_f_tilde * run.level_set_integral("Fp", alpha, "F", ledger.kappa_f * lam)
        trivial = lhs == 0 and T1 == 0 and T2 == 0
        C_alpha = fitted_constant(lhs, T1)
        C_common = fitted_constant(lhs, T1 + T2)
        rows.append({"lambda": lam, "lhs": lhs, "H_term": T1, "F_term": T2, "C_alpha": C_alpha, "C_common": C_common, "trivial": trivial})
        records.append(CheckRecord(
            f"level_set[{lam:.6g}]", "level-set estimate", lhs, T1 + T2, C_common, math.isfinite(C_common), True, "report",
            {"H_term": T1, "F_term": T2, "C_alpha": C_alpha, "C_f": fitted_constant(lhs, T2), "regime": "trivial" if trivial else "active"},
            {"lambda": lam, "function": run.kernel.u.name},
        ))
    active = [r["lambda"] for r in rows if r["lhs"] > 0]
    summary = CheckRecord(
        "level_set_sweep", "level-set estimate", 0.0, 0.0,
        max((r["C_common"] for r in rows), default=0.0), True, True, "report",
        {
            "nonempty_range": [min(active), max(active)] if active else None,
            "C_alpha_max": max((r["C_alpha"] for r in rows), default=0.0),
            "C_alpha_trend": _trend([r["C_alpha"] for r in rows if r["lhs"] > 0]),
        },
        {"function": run.kernel.u.name},
    )
    return records + [summary], rows


def _trend(values) -> str:
    vals = [v for v in values if math.isfinite(v)]
    if len(vals) < 2:
        return "flat"
    diffs = np.diff(vals)
    if np.all(diffs >= 0):
        return "increasing"
    if np.all(diffs <= 0):
        return "decreasing"
    return "mixed"
