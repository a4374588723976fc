"""Cash-or-nothing value and cross gamma with and without Rannacher start-up."""
import argparse
from pathlib import Path

import numpy as np

from mcs_adi.cli import write_companion, write_csv
from mcs_adi.config import load_config
from mcs_adi.experiments import BS_COLUMNS, run_bs_demo

HERE = Path(__file__).resolve().parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=HERE.parent / "configs" / "bsdemo.json")
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config)

    osc = {}
    for n0 in (0, 2):
        run = run_bs_demo(cfg, n0=n0)
        S1, S2 = np.meshgrid(run.grid.x, run.grid.y, indexing="ij")
        path = args.out / f"bs_n0{n0}.csv"
        write_csv(path, BS_COLUMNS, np.column_stack([S1.ravel(), S2.ravel(), run.value.ravel(),
                                                     run.cross_gamma.ravel()]))
        osc[n0] = run.oscillation()
        write_companion(path, BS_COLUMNS, {"n0": n0, "oscillation": osc[n0]})
        print(f"n0={n0}: max value {run.value.max():.6f}, cross-gamma oscillation {osc[n0]:.4g}")
    print(f"oscillation ratio n0=2 / n0=0: {osc[2] / osc[0]:.4f}")


if __name__ == "__main__":
    main()
