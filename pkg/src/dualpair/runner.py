"""Suites behind the command-line subcommands.

Each suite returns a :class:`Report`.  Per-function work runs on a thread
pool; results are merged in configuration order so the output does not
depend on the thread count.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .dyadic import empirical_dim_constants, near_diagonal_cd
from .fields import (
    FunctionalEvaluator,
    PairKernel,
    constants_ledger,
    dual_pair_routes,
    gagliardo_seminorm,
    thresholds,
)
from .grid import Grid, GridFunction, make_catalog_function
from .measure import NuMeasure, diagonal_ball
from .params import (
    check_assumptions,
    conjugate,
    derive_exponents,
    geometric_series_bound,
    sobolev_lower,
    sobolev_upper,
)
from .pipeline import (
    Cover,
    LevelSetRun,
    RootAverageError,
    build_H_lambda,
    classify_cubes,
    exit_cover,
    partition_bad_families,
    root_threshold,
)
from .verify import (
    CheckRecord,
    _record,
    check_arh_corollary,
    check_arh_sup,
    check_dual_embedding,
    check_level_set,
    check_poincare_family,
    check_sums,
    evaluate_rh_sides,
    flag_record,
    pipeline_records,
)

ROUTE_TOL = 0.02


@dataclass
class Report:
    name: str
    summary: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if not r.passed and not r.diagnostic]

    def merge(self, other: Report) -> None:
        self.summary[other.name] = other.summary
        self.records.extend(other.records)
        for key, rows in other.tables.items():
            self.tables[f"{other.name}_{key}"] = rows


def _map(cfg: RunConfig, fn, items):
    items = list(items)
    if cfg.threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


def make_grid(cfg: RunConfig) -> Grid:
    return Grid.symmetric(cfg.params.n, cfg.grid, cfg.half_width)


def make_function(cfg: RunConfig, spec: dict, grid: Grid | None = None) -> GridFunction:
    grid = grid or make_grid(cfg)
    opts = {k: v for k, v in spec.items() if k != "name"}
    if spec["name"] == "trig-random" and "seed" not in opts:
        opts["seed"] = int(cfg.execution["seed"])
    return make_catalog_function(spec["name"], grid, **opts)


def make_kernel(cfg: RunConfig, u: GridFunction, measure: NuMeasure | None = None) -> PairKernel:
    g = None
    if cfg.coefficient["kind"] == "constant":
        g = make_catalog_function("constant", u.grid, c=float(cfg.coefficient["c"]))
    return PairKernel(cfg.params, u, g=g, measure=measure)


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


# -------------------------------------------------------------------- exponents


def suite_exponents(cfg: RunConfig, random_sets: int = 100) -> Report:
    prm = cfg.params
    rep = Report("exponents")
    assumptions = check_assumptions(prm)
    rep.summary["params"] = prm.to_dict()
    rep.summary["assumptions"] = assumptions.to_dict()
    rep.records.append(flag_record("assumptions", "admissible parameters", assumptions.passed))
    if not assumptions.passed:
        return rep
    ex = derive_exponents(prm)
    rep.summary["exponents"] = ex.to_dict()
    rep.summary["alpha_sum"] = 1.0 / (1.0 - 2.0**-ex.alpha_k_rate)
    rep.records.extend(identity_records(prm))

    rng = np.random.default_rng(int(cfg.execution["seed"]))
    worst, count = 0.0, 0
    while count < random_sets:
        cand = random_parameter_set(rng, prm.n)
        if cand is None:
            continue
        count += 1
        for r in identity_records(cand):
            worst = max(worst, r.lhs)
    rep.records.append(_record("identities_random", "exponent identities", worst, 1e-12, mode="bound", terms={"sets": count}))

    bad = []
    for k in range(1, 11):
        for r in np.round(np.arange(0.1, 5.0001, 0.1), 10):
            lhs, rhs = geometric_series_bound(k, float(r))
            if lhs > rhs:
                bad.append((k, float(r)))
    rep.records.append(flag_record("geometric_series", "geometric-series bound", not bad, terms={"violations": len(bad)}))
    return rep


def identity_records(prm) -> list[CheckRecord]:
    """Residuals of the exponent identities; each must stay below 1e-12."""
    ex = derive_exponents(prm)
    n, p, s, eps = prm.n, prm.p, prm.s, prm.eps
    pp = conjugate(p)
    gamma_a = ex.eta / (p - 1)
    gamma_b = pp * (n + eps * p) / (n + s * p + eps * p)
    res = {
        "gamma_forms": abs(gamma_a - gamma_b) / gamma_a,
        "gamma_vs_eta": abs(ex.gamma - gamma_a) / gamma_a,
        "tau_relation": abs(ex.tau + eps * p / ex.eta - (s + eps)),
        "sobolev_conjugate": abs(conjugate(sobolev_upper(p, s, n)) - sobolev_lower(p, s, n)) if s * p < n else 0.0,
    }
    margin = p / (p + 1) - ex.p_lower_s * ex.theta
    out = [_record(f"identity_{k}", "exponent identities", v, 1e-12, mode="bound", context={"params": prm.to_dict()}) for k, v in res.items()]
    out.append(flag_record("identity_theta_window", "p_* theta < p/(p+1)", margin > 0, terms={"margin": margin}))
    return out


def random_parameter_set(rng, n: int):
    """A random admissible parameter set, or None if the draw is rejected."""
    from .params import AssumptionViolation, ParameterSet

    p = float(rng.uniform(2.0, 4.0))
    q = float(p * rng.uniform(1.0, 1.3))
    s = float(rng.uniform(0.2, min(0.95, n / p * 0.95)))
    t = float(s * rng.uniform(0.5, 1.0))
    ratio = t * q / (s * p)
    upper = min(s / p, 1 - s, s * (ratio - (p - 1) / p))
    if upper <= 0:
        return None
    eps = float(upper * rng.uniform(0.05, 0.95))
    prm = ParameterSet(n=n, p=p, q=q, s=s, t=t, eps=eps)
    try:
        derive_exponents(prm)
    except AssumptionViolation:
        return None
    return prm


# ---------------------------------------------------------------------- measure


def suite_measure(cfg: RunConfig) -> Report:
    prm, geo = cfg.params, cfg.geometry
    rep = Report("measure")
    measure = NuMeasure(prm)
    c_ball = measure.ball_constant()
    rep.summary["c_ball"] = c_ball
    n = prm.n
    points = [(0.0,) * n, tuple([0.3, -0.2] + [0.0] * (n - 2))]
    worst = 0.0
    for x in points:
        for ratio in (2, 4):
            measured, exact = measure.doubling_check(x, 0.25 * ratio, 0.25)
            worst = max(worst, _relative(measured, exact))
    rep.records.append(_record("doubling", "doubling exactness", worst, 0.005, mode="bound"))

    samples = int(cfg.execution["mc_samples"])
    region = diagonal_ball((0.0,) * n, 0.5)
    est, err = measure.mc_oracle(region, samples, int(cfg.execution["seed"]))
    det = measure.mass(region)
    rep.records.append(_record(
        "mc_oracle", "Monte Carlo agreement", abs(est - det), 3 * err, mode="bound",
        terms={"deterministic": det, "estimate": est, "stderr": err, "samples": samples},
    ))

    scaled = [prm.eps * measure.mass(diagonal_ball((0.0,) * n, R)) / R**measure.homogeneity for R in (0.25, 0.5, 1.0)]
    spread = (max(scaled) - min(scaled)) / max(scaled)
    rep.records.append(_record("scale_law", "ball mass scaling", spread, 0.01, mode="bound", terms={"values": scaled}))

    levels = range(geo.k0, geo.k0 + int(cfg.execution["dim_levels"]))
    dims = empirical_dim_constants(prm, geo, levels, tuple(cfg.execution["eps_sweep"]))
    rep.summary["dim_constants"] = {str(k): v for k, v in dims["per_eps"].items()}
    for key in ("C_dd", "C_ddd"):
        vals = [v[key] for v in dims["per_eps"].values()]
        rep.records.append(_record(f"{key}_eps_spread", "dimensional constants", max(vals) / min(vals), 4.0, mode="bound", terms={"values": vals}))
    rep.summary["C_d"] = near_diagonal_cd(prm, geo)
    rep.summary["geometry"] = {"k0": geo.k0, "radius_cap": geo.radius_cap(), "admission_radius": geo.admission_radius}
    return rep


# ----------------------------------------------------------------------- energy


def suite_energy(cfg: RunConfig) -> Report:
    rep = Report("energy")
    grid = make_grid(cfg)
    measure = NuMeasure(cfg.params)
    near = int(cfg.execution["near"])
    geo = cfg.geometry

    def one(spec):
        u = make_function(cfg, spec, grid)
        kern = make_kernel(cfg, u, measure)
        leb, nu = kern.energy_routes(near=near)
        d_leb, d_nu = dual_pair_routes(kern, geo.x0, geo.alpha, near=near)
        recs = [
            _record("energy_routes", "energy identity", _relative(leb, nu), ROUTE_TOL, mode="bound",
                    terms={"lebesgue": leb, "nu": nu}, context={"function": u.name}),
            _record("dual_pair_routes", "dual-pair identity", _relative(d_leb, d_nu), ROUTE_TOL, mode="bound",
                    terms={"lebesgue": d_leb, "nu": d_nu}, context={"function": u.name, "radius": geo.alpha}),
        ]
        recs += check_poincare_family(u, geo.x0, geo.rho0, cfg.params.s, cfg.params.p)
        recs.append(check_dual_embedding(kern, geo.x0, geo.rho0))
        semi = gagliardo_seminorm(u, cfg.params.s, cfg.params.p, near=near)
        return u.name, {"energy": nu, "seminorm": semi}, recs

    for name, summ, recs in _map(cfg, one, cfg.functions):
        rep.summary[name] = summ
        rep.records.extend(recs)
    return rep


# ------------------------------------------------------------ decompose / verify


@dataclass
class FunctionState:
    spec: dict
    run: LevelSetRun
    arh: CheckRecord


def _prepare(cfg: RunConfig, grid: Grid, measure: NuMeasure):
    def one(spec):
        u = make_function(cfg, spec, grid)
        kern = make_kernel(cfg, u, measure)
        run = LevelSetRun(kern, cfg.geometry, FunctionalEvaluator(kern))
        return FunctionState(spec, run, check_arh_sup(run))

    return _map(cfg, one, cfg.functions)


def measured_ledger(cfg: RunConfig, states: list[FunctionState]):
    prm, geo = cfg.params, cfg.geometry
    levels = range(geo.k0, geo.k0 + int(cfg.execution["dim_levels"]))
    dims = empirical_dim_constants(prm, geo, levels, (prm.eps,))
    C_nd = max((s.arh.fitted for s in states), default=0.0)
    # a vanishing C_nd (constant functions only) leaves kappa unconstrained by it
    meas = {
        "c_ball": NuMeasure(prm).ball_constant(),
        "C_d": near_diagonal_cd(prm, geo),
        "C_nd": C_nd if C_nd > 0 else 1.0,
        "C_dd": dims["C_dd_hat"],
        "C_ddd": dims["C_ddd_hat"],
    }
    ex = cfg.execution
    return constants_ledger(prm, meas, C2=float(ex["C2"]), C3=float(ex["C3"]))


def lambda_grid(run: LevelSetRun, factors) -> list[float]:
    base = root_threshold(run)
    if base <= 0:
        base = 1.0
    return [base * float(f) for f in factors]


def _decompose_one(cfg: RunConfig, state: FunctionState, ledger, with_checks: bool):
    run = state.run
    kappa = ledger.kappa["kappa"]
    M_big = ledger.M_big
    relaxed = not cfg.geometry.faithful
    theorem = cfg.mode == "theorem"
    th = thresholds(run.evaluator, cfg.geometry, kappa, M_big=M_big, C_a=float(cfg.execution["C_a"]))
    name = run.kernel.u.name
    records, tables = [], {"balls": [], "cubes": [], "bad_index": [], "lambda": []}
    for lam in lambda_grid(run, cfg.execution["lambda_factors"]):
        if theorem and lam < max(th.lambda0, th.lambda2):
            records.append(flag_record("lambda_regime", "lambda above the theorem thresholds", False, diagnostic=True,
                                       context={"lambda": lam, "function": name}))
            continue
        try:
            hl = build_H_lambda(run, lam)
        except RootAverageError as exc:
            records.append(flag_record("root_average", "root averages below the height", False, context={"lambda": lam, "function": name, "error": str(exc)}))
            continue
        cover = exit_cover(run, lam, kappa, M_big)
        fam = classify_cubes(hl, cover, run, lam, kappa)
        bad = partition_bad_families(fam, run, ledger.C_n)
        records += pipeline_records(run, hl, cover, fam, bad, relaxed)
        # same stopping family sorted against an empty cover: every bad cube
        # lands in B_nd, which exercises the counting argument at desk scale
        bare = dataclasses.replace(cover, balls=[])
        fam_s = classify_cubes(hl, bare, run, lam, kappa)
        bad_s = partition_bad_families(fam_s, run, ledger.C_n)
        records += stress_records(run, fam_s, bad_s, ledger, lam, th.lambda1, with_checks)
        if with_checks:
            records += check_sums(run, fam, cover, bad, ledger, lam, th.lambda1)
            records.append(check_arh_corollary(run, lam, kappa, ledger.C_nd))
        tables["lambda"].append({"function": name, "lambda": lam, "balls": len(cover.balls), **{k: v for k, v in fam.checks.items() if not isinstance(v, dict)}})
        for j, b in enumerate(cover.balls):
            tables["balls"].append({"function": name, "lambda": lam, "j": j, "center": " ".join(f"{c:.12g}" for c in b.center), "radius": b.radius})
        for i, (k, a, bb) in enumerate(fam.cubes.keys()):
            tables["cubes"].append({
                "function": name, "lambda": lam, "level": k, "K1": " ".join(map(str, a)), "K2": " ".join(map(str, bb)),
                "tag": fam.tags[i] or "near", "bad1": bool(fam.bad_h[i, 0]), "bad2": bool(fam.bad_h[i, 1]),
                "covered": bool(fam.covered[i]),
            })
        for e in bad.entries:
            tables["bad_index"].append({
                "function": name, "lambda": lam, "cube": e["cube"], "h": e["h"], "M_level": e["M"][0],
                "M_index": " ".join(map(str, e["M"][1])), "i": e["i"], "j": e["j"], "m": e["m"],
            })
    summary = {"thresholds": th.to_dict(), "root_threshold": root_threshold(run)}
    return name, summary, records, tables


def stress_records(run, fam, bad, ledger, lam, lam1, with_checks) -> list[CheckRecord]:
    ctx = {"lambda": lam, "kappa": fam.kappa, "function": run.kernel.u.name, "variant": "empty cover"}
    b = bad.checks
    out = [
        _record("cardinality_stress", "bad cubes per (i, j, m)", b["max_count_over_2^{n(i+j)}"], b["cardinality_constant"],
                mode="bound", terms={**b, "bad_nd": fam.checks["bad_nd"]}, context=ctx),
        flag_record("combinatorial_lemma_stress", "projection inside M forces distance", b["combinatorial_lemma_ok"],
                    diagnostic=True, context=ctx),
    ]
    if with_checks:
        bare = Cover(lam, fam.kappa, [], np.zeros((0, run.n)), np.zeros(0), {
            "sum_nu_balls": 0.0, "dilated_sum_factor_eps": 1.0, "dilated_sum_factor_p": 1.0,
            "dilated_sum_lhs": 0.0, "dilated_sum_rhs": 0.0,
        })
        for r in check_sums(run, fam, bare, bad, ledger, lam, lam1):
            if r.check_id in ("sum_hard", "sum_step2"):
                out.append(dataclasses.replace(r, check_id=r.check_id + "_stress", context={**r.context, **ctx}))
    return out


def suite_decompose(cfg: RunConfig, with_checks: bool = False, name: str = "decompose") -> Report:
    rep = Report(name)
    grid = make_grid(cfg)
    measure = NuMeasure(cfg.params)
    states = _prepare(cfg, grid, measure)
    ledger = measured_ledger(cfg, states)
    rep.summary["constants"] = ledger.to_dict()
    outs = _map(cfg, lambda st: _decompose_one(cfg, st, ledger, with_checks), states)
    for st, (fname, summ, recs, tabs) in zip(states, outs):
        rep.summary[fname] = summ
        if with_checks:
            rep.records.append(st.arh)
        rep.records.extend(recs)
        for key, rows in tabs.items():
            rep.tables.setdefault(key, []).extend(rows)
    if with_checks:
        _verify_extras(cfg, rep, states, ledger, outs)
    return rep


def _verify_extras(cfg: RunConfig, rep: Report, states, ledger, outs) -> None:
    geo = cfg.geometry
    pts = int(cfg.execution["level_set_points"])
    rows_all = []

    def one(args):
        st, out = args
        run = st.run
        lam0 = out[1]["thresholds"]["lambda0"]
        beta_pairs = run.ball_pairs_mask(geo.beta)
        hmax = float(run.Hmat[beta_pairs].max(initial=0.0))
        base = root_threshold(run)
        if hmax > 0 and base > 0:
            lams = list(np.geomspace(base / 4, hmax, pts))
        else:
            lams = [1.0]
        recs, rows = check_level_set(run, lams, ledger, lam0)
        recs.append(evaluate_rh_sides(run.kernel, geo.x0, geo.rho0, min(max(ledger.sigma_rh, 1e-6), 0.999)))
        return recs, rows

    for recs, rows in _map(cfg, one, list(zip(states, outs))):
        rep.records.extend(recs)
        rows_all.extend(rows)
    rep.tables["level_set"] = rows_all


def suite_verify(cfg: RunConfig) -> Report:
    return suite_decompose(cfg, with_checks=True, name="verify")


def suite_all(cfg: RunConfig) -> Report:
    rep = Report("all")
    for suite in (suite_exponents, suite_measure, suite_energy, suite_verify):
        rep.merge(suite(cfg))
    return rep


SUITES = {
    "exponents": suite_exponents,
    "measure": suite_measure,
    "energy": suite_energy,
    "decompose": suite_decompose,
    "verify": suite_verify,
    "all": suite_all,
}
