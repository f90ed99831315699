"""Command line entry point: ``spinrelax {rates,check,compare,tunneling}``.

Exit codes: 0 ok, 1 config error, 2 numerical failure, 3 property violation.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import nonsecular as ns
from .checks import point_checks
from .config import ConfigError, RunConfig, load_config
from .model import build_point, reference_localized
from .spin import build_hamiltonian
from .sweep import (
    TUNNEL_HEADER,
    format_table,
    grid_points,
    make_bath,
    run_sweep,
    spin_parameters,
    temperature_energy,
    tunneling_scan,
    write_outputs,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PROPERTY = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinrelax", description="Spin relaxation rates from a Redfield tensor.")
    ap.add_argument("verb", choices=("rates", "check", "compare", "tunneling"))
    ap.add_argument("--config", required=True, help="INI-style run configuration")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--format", choices=("csv", "plot", "both"), default="csv")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--strict", action="store_true", help="reject unknown config keys")
    return ap


def _write(path, text) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_rates(cfg: RunConfig, args) -> int:
    res = run_sweep(cfg, threads=args.threads)
    for path in write_outputs(res, cfg, args.out, args.format):
        print(f"wrote {path}")
    bad = res.failures()
    for r in bad:
        print(f"T={r.T:g} B={r.B:g} {r.method}: {r.error}", file=sys.stderr)
    return EXIT_NUMERIC if bad else EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    if "nonsecular" not in cfg.methods:
        cfg = RunConfig(**{**cfg.__dict__, "methods": ("nonsecular",) + cfg.methods})
    res = run_sweep(cfg, threads=args.threads)
    lines = ["T,Bz,method,ratio"]
    worst = {}
    for r in res.rows:
        if r.method == "nonsecular":
            continue
        ratio = "" if np.isnan(r.ratio) else format(r.ratio, ".17g")
        lines.append(f"{format(r.T, '.17g')},{format(r.B, '.17g')},{r.method},{ratio}")
        dev = abs(r.ratio - 1) if np.isfinite(r.ratio) else np.inf
        worst[r.method] = max(worst.get(r.method, 0.0), dev)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "compare.csv")
    _write(path, "\n".join(lines) + "\n")
    print(f"wrote {path}")
    for m, d in worst.items():
        print(f"{m:20s} max |lambda/lambda_exact - 1| = {d:.3e}")
    return EXIT_NUMERIC if res.failures() else EXIT_OK


def cmd_check(cfg: RunConfig, args) -> int:
    reference = reference_localized(spin_parameters(cfg), cfg.pairing_threshold)
    bath = make_bath(cfg)
    failed_checks, numeric = 0, 0
    for i, (T, B) in enumerate(grid_points(cfg)):
        try:
            P = build_point(build_hamiltonian(spin_parameters(cfg, B)), bath,
                            temperature_energy(cfg, T), reference, cfg.pairing_threshold)
            results = point_checks(P, seed=args.seed + i)
        except (ns.SolverError, ValueError, np.linalg.LinAlgError) as exc:
            numeric += 1
            print(f"T={T:g} B={B:g}: numerical failure: {exc}")
            continue
        for c in results:
            flag = "PASS" if c.passed else "FAIL"
            failed_checks += not c.passed
            print(f"T={T:g} B={B:g} {c.name:26s} {c.value:.3e} <= {c.tol:.0e} {flag}")
    if failed_checks:
        return EXIT_PROPERTY
    return EXIT_NUMERIC if numeric else EXIT_OK


def cmd_tunneling(cfg: RunConfig, args) -> int:
    params = spin_parameters(cfg, cfg.fields[0])
    reference = reference_localized(params, cfg.pairing_threshold)
    lo, hi, n = cfg.tunnel_bias
    rows = tunneling_scan(build_hamiltonian(params), make_bath(cfg),
                          temperature_energy(cfg, cfg.tunnel_temperature), reference,
                          cfg.tunnel_pair, np.linspace(lo, hi, int(n)), cfg.pairing_threshold,
                          tol=cfg.sc_tol, max_iter=cfg.max_iter, damping=cfg.damping,
                          fallback=cfg.bracket, term_tol=cfg.term_tol, max_order=cfg.max_order)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "tunneling.csv")
    _write(path, format_table(TUNNEL_HEADER, rows))
    print(f"wrote {path}")
    return EXIT_NUMERIC if any(r.error for r in rows) else EXIT_OK


VERBS = {"rates": cmd_rates, "check": cmd_check, "compare": cmd_compare, "tunneling": cmd_tunneling}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, strict=args.strict)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        make_bath(cfg)
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "config_echo.ini"), cfg.echo())
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return VERBS[args.verb](cfg, args)
    except (ns.SolverError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
