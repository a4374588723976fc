"""Observed and predicted max-norm errors for a grid of (theta, lambda, n0) cases.

One CSV (plus column companion) per case, named conv_theta<..>_lam<..>_n0<..>.csv.

    python scripts/convergence_sweep.py --theta 1/3 1 1/2 --lam 0.2 0.4 0.8 --n0 0 2 --inv-h 8 16 32
"""
import argparse
from fractions import Fraction
from pathlib import Path

from mcs_adi.cli import write_companion, write_csv
from mcs_adi.config import parse_config
from mcs_adi.experiments import CONVERGENCE_COLUMNS, run_convergence


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--theta", nargs="+", default=["1/3", "1", "1/2"])
    ap.add_argument("--lam", nargs="+", type=float, default=[0.2, 0.4, 0.8])
    ap.add_argument("--n0", nargs="+", type=int, default=[0, 2])
    ap.add_argument("--inv-h", nargs="+", type=int, default=[8, 16, 32])
    ap.add_argument("--no-prediction", action="store_true")
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for th in args.theta:
        theta = float(Fraction(th))
        for lam in args.lam:
            for n0 in args.n0:
                cfg = parse_config({"scheme": {"theta": theta, "lambda": lam, "n0": n0},
                                    "mesh": {"inv_h": args.inv_h}})
                rows = run_convergence(cfg, with_prediction=not args.no_prediction)
                name = f"conv_theta{th.replace('/', '-')}_lam{lam:g}_n0{n0}.csv"
                path = args.out / name
                write_csv(path, CONVERGENCE_COLUMNS, rows)
                write_companion(path, CONVERGENCE_COLUMNS, {"theta": theta, "lambda": lam, "n0": n0})
                summary = "  ".join(f"1/h={r['inv_h']}: {r['max_error']:.3e}" for r in rows)
                print(f"{name}: {summary}")


if __name__ == "__main__":
    main()
