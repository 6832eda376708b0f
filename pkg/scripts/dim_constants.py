"""Measured C_dd and C_ddd across an eps sweep at relaxed desk scale.

    python3 scripts/dim_constants.py --eps 0.02 0.05 0.1 0.2 0.25
"""

import argparse

from dualpair.dyadic import Geometry, empirical_dim_constants
from dualpair.params import CANONICAL


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.02, 0.05, 0.1, 0.2, 0.25])
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args(argv)
    geo = Geometry((0.0, 0.0), 0.35, 0.4, 0.5, chi=0.25, ball_factor=3.0)
    # eps is swept directly on the measure; the parameter gates are not involved here
    out = empirical_dim_constants(CANONICAL, geo, range(geo.k0, geo.k0 + args.levels), tuple(args.eps))
    print("eps,C_dd,C_ddd,first,second")
    for eps, v in out["per_eps"].items():
        print(f"{eps},{v['C_dd']:.6g},{v['C_ddd']:.6g},{v['first']:.6g},{v['second']:.6g}")
    print(f"# offsets: {out['offsets']}")


if __name__ == "__main__":
    main()
