"""Command-line entry point: ``mcs solve|convergence|fourier|estimate|bsdemo``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import MODES, ConfigError, RunConfig, load_config
from .quadrature import QuadratureError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

log = logging.getLogger("mcs_adi")


def _fmt(v, short: bool = False) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return repr(float(v)) if short else f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, columns: list[tuple[str, str]], rows) -> None:
    """Header row plus one line per row; floats with 17 significant digits."""
    names = [c for c, _ in columns]
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        if isinstance(rows, np.ndarray):
            np.savetxt(fh, rows, fmt="%.17g", delimiter=",")
        else:
            for row in rows:
                fh.write(",".join(_fmt(row[n]).replace(",", ";") for n in names) + "\n")


def write_companion(csv_path: Path, columns: list[tuple[str, str]], report: dict) -> Path:
    """Plain-text file next to the CSV: column descriptions, then key: value lines."""
    path = csv_path.with_suffix(".txt")
    lines = [f"# columns of {csv_path.name}"]
    lines += [f"# {i}: {name} - {desc}" for i, (name, desc) in enumerate(columns, start=1)]
    lines += [f"{k}: {_fmt(v, short=True)}" for k, v in report.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def _outputs(base: Path, inv_h: tuple, suffix: str = "") -> dict:
    if len(inv_h) == 1:
        return {inv_h[0]: base}
    return {n: base.with_name(f"{base.stem}{suffix}_h{n}{base.suffix}") for n in inv_h}


def _common_report(cfg: RunConfig, mode: str) -> dict:
    s, m = cfg.scheme, cfg.model
    return {
        "mode": mode, "rho": m.rho, "a1": m.a1, "a2": m.a2, "theta": s.theta, "lambda": s.lam,
        "c": s.c, "n0": s.n0, "theta_admissible": cfg.theta_admissible,
        "domain_min": cfg.domain[0], "domain_max": cfg.domain[1],
    }


def cmd_solve(cfg: RunConfig, out: Path) -> None:
    for inv_h, path in _outputs(out, cfg.inv_h).items():
        sp = cfg.scheme_params(inv_h)
        run = ex.solve_model(cfg.model, sp, cfg.domain)
        X, Y = np.meshgrid(run.grid.x, run.grid.y, indexing="ij")
        write_csv(path, [("x", "x coordinate"), ("y", "y coordinate"), ("value", "U_N at (x, y)")],
                  np.column_stack([X.ravel(), Y.ravel(), run.values.ravel()]))
        report = {**_common_report(cfg, "solve"), "inv_h": inv_h, "N": sp.N, "dt": sp.dt,
                  "max_error": run.max_error, "mass": run.mass(), "seconds": run.seconds, **run.report}
        write_companion(path, [], report)
        log.info("wrote %s", path)


def cmd_convergence(cfg: RunConfig, out: Path) -> int:
    rows = ex.run_convergence(cfg)
    write_csv(out, ex.CONVERGENCE_COLUMNS, rows)
    failed = [r for r in rows if r["status"] != "ok"]
    write_companion(out, ex.CONVERGENCE_COLUMNS, {**_common_report(cfg, "convergence"), "failed_rows": len(failed)})
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_fourier(cfg: RunConfig, out: Path) -> None:
    for inv_h, path in _outputs(out, cfg.inv_h).items():
        sp = cfg.scheme_params(inv_h)
        T1, T2, mod = ex.run_fourier_map(cfg.model, sp, cfg.fourier.samples)
        write_csv(path, ex.FOURIER_COLUMNS, np.column_stack([T1.ravel(), T2.ravel(), mod.ravel()]))
        write_companion(path, ex.FOURIER_COLUMNS, {**_common_report(cfg, "fourier"), "inv_h": inv_h,
                                                   "N": sp.N, "dt": sp.dt, "samples": cfg.fourier.samples})


def cmd_estimate(cfg: RunConfig, out: Path) -> None:
    for inv_h, path in _outputs(out, cfg.inv_h).items():
        rows = ex.run_estimate(cfg, inv_h)
        write_csv(path, ex.ESTIMATE_COLUMNS, rows)
        sp = cfg.scheme_params(inv_h)
        write_companion(path, ex.ESTIMATE_COLUMNS, {
            **_common_report(cfg, "estimate"), "inv_h": inv_h, "N": sp.N,
            "quadrature_rel_tol": cfg.quadrature.rel_tol, "quadrature_radius": cfg.quadrature.radius,
            "index_window": cfg.estimate.window,
        })


def cmd_bsdemo(cfg: RunConfig, out: Path) -> None:
    run = ex.run_bs_demo(cfg)
    S1, S2 = np.meshgrid(run.grid.x, run.grid.y, indexing="ij")
    write_csv(out, ex.BS_COLUMNS, np.column_stack([S1.ravel(), S2.ravel(), run.value.ravel(), run.cross_gamma.ravel()]))
    bs = cfg.bs.params
    report = {
        "mode": "bsdemo", "r": bs.r, "sigma1": bs.sigma1, "sigma2": bs.sigma2, "rho": bs.rho,
        "K1": bs.K1, "K2": bs.K2, "T": bs.T, "intervals": cfg.bs.intervals, "s_max": cfg.bs.s_max,
        **run.report, "oscillation": run.oscillation(),
    }
    if run.n0 != 0:
        base = ex.run_bs_demo(cfg, n0=0)
        report["oscillation_n0_0"] = base.oscillation()
        report["oscillation_ratio"] = run.oscillation() / base.oscillation()
    write_companion(out, ex.BS_COLUMNS, report)


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "fourier": cmd_fourier,
    "estimate": cmd_estimate,
    "bsdemo": cmd_bsdemo,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcs", description="MCS ADI scheme with Rannacher start-up: solver and error analysis")
    p.add_argument("command", choices=MODES)
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", help="output CSV path (default: the config's 'output', else <command>.csv)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg = load_config(args.config)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        if cfg.mode is not None and cfg.mode != args.command:
            raise ConfigError(f"config is for mode '{cfg.mode}', not '{args.command}'")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output or f"{args.command}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        code = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (*ex.SOLVER_ERRORS, QuadratureError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
