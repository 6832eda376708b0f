"""Bad-cube counting with and without the exit-time cover, over a lambda grid.

With the measured kappa the single exit ball swallows every off-diagonal bad
cube at desk scale; dropping the cover routes them all through the counting
argument instead.

    python3 scripts/cardinality_stress.py --function trig-random
"""

import argparse
import dataclasses

from dualpair.config import load_config
from dualpair.fields import FunctionalEvaluator
from dualpair.pipeline import (
    LevelSetRun,
    build_H_lambda,
    classify_cubes,
    exit_cover,
    partition_bad_families,
)
from dualpair.runner import (
    FunctionState,
    lambda_grid,
    make_function,
    make_grid,
    make_kernel,
    measured_ledger,
)
from dualpair.verify import check_arh_sup


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--function", default="trig-random")
    ap.add_argument("--grid", type=int, default=32)
    ap.add_argument("--factors", type=float, nargs="+", default=[1.0, 1.05, 1.15, 1.35, 1.7])
    args = ap.parse_args(argv)
    cfg = load_config(None, {"geometry.grid": args.grid, "functions": [{"name": args.function}]})
    u = make_function(cfg, cfg.functions[0], make_grid(cfg))
    kern = make_kernel(cfg, u)
    run = LevelSetRun(kern, cfg.geometry, FunctionalEvaluator(kern))
    ledger = measured_ledger(cfg, [FunctionState(cfg.functions[0], run, check_arh_sup(run))])
    kappa = ledger.kappa["kappa"]
    print("lambda,cover,balls,H_lambda,good,bad_d,bad_nd,problem_cubes,max_count_ratio,C_n,lemma_ok")
    for lam in lambda_grid(run, args.factors):
        hl = build_H_lambda(run, lam)
        cover = exit_cover(run, lam, kappa, ledger.M_big)
        for label, cv in (("exit", cover), ("none", dataclasses.replace(cover, balls=[]))):
            fam = classify_cubes(hl, cv, run, lam, kappa)
            bad = partition_bad_families(fam, run, ledger.C_n)
            f, b = fam.checks, bad.checks
            print(f"{lam:.6g},{label},{len(cv.balls)},{f['H_lambda']},{f['good']},{f['bad_d']},{f['bad_nd']},"
                  f"{b['problem_cubes']},{b['max_count_over_2^{n(i+j)}']:.4g},{b['cardinality_constant']:.4g},"
                  f"{b['combinatorial_lemma_ok']}")


if __name__ == "__main__":
    main()
