"""(T, B) grid sweeps: one row per point and method, deterministic ordering."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import closed_forms as cf
from . import nonsecular as ns
from . import reduction as red
from .bath import Bath, CouplingOperator, SpectralDensity, quadrupolar_couplings
from .config import RunConfig
from .model import Point, build_point, reference_localized
from .spin import SpinParameters, build_hamiltonian, polynomial_operator, spin_operators
from .units import kelvin_to_energy

CSV_HEADER = ["T", "Bz", "method", "lambda", "gamma_tunnel_g", "gamma_corr_max",
              "iters", "valid_flags", "error", "ratio"]

# below this |Im|/|Re| the slow mode counts as a pure decay
COMPLEX_MODE_TOL = 1e-8
# fewer than this factor between the slow rate and the next one
GAP_WARN = 3.0


@dataclass
class Row:
    T: float
    B: float
    method: str
    lam: float = np.nan
    gamma_tunnel_g: float = np.nan
    gamma_corr_max: float = np.nan
    iters: int | None = None
    flags: list = field(default_factory=list)
    error: str = ""
    ratio: float = np.nan

    def cells(self) -> list:
        return [_num(self.T), _num(self.B), self.method, _num(self.lam), _num(self.gamma_tunnel_g),
                _num(self.gamma_corr_max), "" if self.iters is None else str(self.iters),
                ";".join(self.flags) if self.flags else ("" if self.error else "ok"),
                self.error, _num(self.ratio)]


def _num(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return format(float(x), ".17g")


def method_names(cfg: RunConfig) -> list:
    out = []
    for m in cfg.methods:
        if m == "reduced":
            out += ["reduced_" + b for b in cfg.reduced_bases()]
        else:
            out.append(m)
    return out


def spin_parameters(cfg: RunConfig, B: float = 0.0) -> SpinParameters:
    d = np.asarray(cfg.field_direction, dtype=float)
    d = d / np.linalg.norm(d)
    return SpinParameters(S=cfg.S, D=cfg.D, E=cfg.E, B=tuple(B * d), g=cfg.g,
                          extra_terms=cfg.extra_terms)


def make_bath(cfg: RunConfig) -> Bath:
    if cfg.bath_form == "tabulated":
        density = SpectralDensity.from_file(cfg.table, cfg.alpha)
    else:
        density = SpectralDensity(cfg.bath_form, cfg.alpha, cfg.cutoff)
    ops = spin_operators(cfg.S)
    if cfg.couplings.strip() == "quadrupolar":
        couplings = quadrupolar_couplings(ops, cfg.strength)
    else:
        couplings = [CouplingOperator(polynomial_operator(e, ops), cfg.strength)
                     for e in cfg.couplings.split(";") if e.strip()]
    return Bath(couplings, density)


def temperature_energy(cfg: RunConfig, T: float) -> float:
    return kelvin_to_energy(T) if cfg.temperature_unit == "kelvin" else float(T)


def _error_code(exc: Exception) -> str:
    if isinstance(exc, red.ResonanceError):
        code = "E_RESONANCE"
    elif isinstance(exc, red.SeriesDivergence):
        code = "E_SERIES"
    elif isinstance(exc, ns.SolverError):
        code = "E_SOLVER"
    else:
        code = "E_NUMERIC"
    msg = " ".join(str(exc).replace(",", " ").split())
    return f"{code}: {msg}"


def _slow_mode_row(row: Row, mode: ns.SlowMode) -> None:
    row.lam = mode.rate
    if abs(mode.eigenvalue.imag) > COMPLEX_MODE_TOL * max(abs(mode.eigenvalue.real), 1e-300):
        row.flags.append("complex_mode")
    if mode.gap_ratio < GAP_WARN:
        row.flags.append("small_gap")


def _reduced_row(row: Row, sol: red.SelfConsistentSolution, pairs) -> None:
    row.lam = sol.lam
    row.iters = sol.iterations
    if pairs:
        g, gp = pairs[0]
        row.gamma_tunnel_g = float(sol.final.rates.tunnel[g, gp])
    C = sol.final.rates.corr
    off = ~np.eye(C.shape[0], dtype=bool)
    row.gamma_corr_max = float(np.abs(C[off]).max()) if off.any() else 0.0
    if sol.method != "fixed-point":
        row.flags.append(sol.method)
    if not sol.final.series.converged:
        row.flags.append("truncated")


def evaluate_point(cfg: RunConfig, T: float, B: float, reference=None, bath=None) -> list:
    """All configured methods at one grid point. Failures are recorded per row."""
    names = method_names(cfg)
    rows = [Row(T, B, m) for m in names]
    try:
        params = spin_parameters(cfg, B)
        reference = reference or reference_localized(params, cfg.pairing_threshold)
        P = build_point(build_hamiltonian(params), bath or make_bath(cfg),
                        temperature_energy(cfg, T), reference, cfg.pairing_threshold)
    except (ns.SolverError, ValueError, np.linalg.LinAlgError) as exc:
        for r in rows:
            r.error = _error_code(exc)
        return rows
    for row in rows:
        try:
            _run_method(cfg, P, row)
        except (ns.SolverError, ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
            row.error = _error_code(exc)
    ref = next((r for r in rows if r.method == "nonsecular" and not r.error), None)
    if ref is not None:
        for r in rows:
            if not r.error:
                r.ratio = r.lam / ref.lam
    return rows


def _run_method(cfg: RunConfig, P: Point, row: Row) -> None:
    m = row.method
    thr = cfg.overlap_threshold
    if m == "nonsecular":
        _slow_mode_row(row, P.exact(thr))
    elif m == "semisecular":
        _slow_mode_row(row, P.semisecular("localized", thr))
    elif m == "secular_localized":
        _slow_mode_row(row, ns.secular_rate(P.generator("localized"), thr))
    elif m == "secular_eigen":
        _slow_mode_row(row, ns.secular_rate(P.generator("eigen"), thr))
    elif m.startswith("reduced_"):
        basis = m.split("_", 1)[1]
        R, H = P.tensor(basis)
        order = cfg.order if cfg.order == "adaptive" else int(cfg.order)
        sol = red.solve_self_consistent(R, H, P.pairs, order=order, tol=cfg.sc_tol,
                                        max_iter=cfg.max_iter, damping=cfg.damping,
                                        fallback=cfg.bracket, term_tol=cfg.term_tol,
                                        max_order=cfg.max_order)
        _reduced_row(row, sol, P.pairs)
        if basis == "localized" and not cf.high_T_regime(R, P.pairs).ok:
            row.flags.append("outside_high_T")
        if basis == "eigen" and not cf.eigen_regime(R, P.eigen.energies, P.pairs).ok:
            row.flags.append("ground_splitting_small")
    else:
        raise ValueError(f"unknown method {m!r}")


@dataclass
class SweepResult:
    rows: list
    methods: list
    grid: list

    def failures(self) -> list:
        return [r for r in self.rows if r.error]

    def by_method(self, method: str) -> list:
        return [r for r in self.rows if r.method == method]


def grid_points(cfg: RunConfig) -> list:
    """(T, B) pairs in lexicographic order."""
    return [(float(T), float(B)) for T in cfg.temperatures for B in cfg.fields]


def run_sweep(cfg: RunConfig, threads: int = 1) -> SweepResult:
    grid = grid_points(cfg)
    bath = make_bath(cfg)
    reference = reference_localized(spin_parameters(cfg), cfg.pairing_threshold)

    def job(pt):
        return evaluate_point(cfg, pt[0], pt[1], reference, bath)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(job, grid))
    else:
        chunks = [job(pt) for pt in grid]
    rows = [r for c in chunks for r in c]
    return SweepResult(rows, method_names(cfg), grid)


def format_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in result.rows:
        w.writerow(r.cells())
    return buf.getvalue()


def format_plot(result: SweepResult, method: str) -> str:
    """Two columns (T, lambda), one line per grid point; failed points are nan."""
    lines = [f"# method={method} columns: T lambda (grid order T then Bz)"]
    for r in result.by_method(method):
        lam = "nan" if r.error else format(r.lam, ".17g")
        lines.append(f"{format(r.T, '.17g')} {lam}")
    return "\n".join(lines) + "\n"


def write_outputs(result: SweepResult, cfg: RunConfig, outdir, fmt: str = "csv") -> list:
    os.makedirs(outdir, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        path = os.path.join(outdir, cfg.csv_name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(result))
        written.append(path)
    if fmt in ("plot", "both"):
        for m in result.methods:
            path = os.path.join(outdir, f"{cfg.plot_prefix}{m}.dat")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(format_plot(result, m))
            written.append(path)
    return written


TUNNEL_HEADER = ["W", "lambda", "gamma_tunnel", "gamma_incoherent", "gamma_prime", "regime_ratio", "error"]


@dataclass
class TunnelRow:
    W: float
    lam: float = np.nan
    gamma_tunnel: float = np.nan
    gamma_incoherent: float = np.nan
    gamma_prime: float = np.nan
    regime_ratio: float = np.nan
    error: str = ""

    def cells(self) -> list:
        return [_num(self.W), _num(self.lam), _num(self.gamma_tunnel), _num(self.gamma_incoherent),
                _num(self.gamma_prime), _num(self.regime_ratio), self.error]


def tunneling_scan(H, bath: Bath, temperature: float, reference, pair: int, biases,
                   threshold: float = 0.5, **solver) -> list:
    """Zeroth-order tunneling rate of one doublet against its bias W.

    Each row holds the full zeroth-order rate at the self-consistent lambda, the
    incoherent-limit rate from the same W, Delta and gamma, and the regime ratio
    gamma' / max(lambda, |R_mm',m'm|, |R_mm',m'm + R_m'm,mm'|/2).
    """
    from .closed_forms import incoherent_rate
    from .spin import extract_doublet_params, scale_doublet

    base = build_point(H, bath, temperature, reference, threshold)
    m, mp = base.pairs[pair]
    rows = []
    for W in biases:
        row = TunnelRow(float(W))
        try:
            P = build_point(scale_doublet(H, base.localized, pair, 1.0, bias=W), bath,
                            temperature, reference, threshold)
            sol = P.reduced("localized", **solver)
            co = red.compute_coefficients(P.R_loc, P.H_loc, P.pairs, sol.lam)
            z = red.zeroth_order_rates(co, P.R_loc, P.H_loc)
            dp = extract_doublet_params(P.H, P.localized)
            R4 = P.R_loc.as4()
            g = -R4[m, mp, m, mp]
            row.lam = sol.lam
            row.gamma_tunnel = float(z.tunnel[m, mp])
            row.gamma_prime = float(g.real)
            r = R4[m, mp, mp, m]
            row.regime_ratio = float(g.real / max(sol.lam, abs(r), abs(r + R4[mp, m, m, mp]) / 2, 1e-300))
            row.gamma_incoherent = incoherent_rate(dp.Delta[pair], dp.W[pair], g.real, g.imag)
        except (ns.SolverError, ValueError, np.linalg.LinAlgError) as exc:
            row.error = _error_code(exc)
        rows.append(row)
    return rows


def format_table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()
