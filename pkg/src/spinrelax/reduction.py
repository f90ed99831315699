"""Self-consistent secular reduction of the non-secular Redfield equation.

Coherences kept are the intra-doublet ones, rho_mm' and rho_m'm. Assuming every
element decays as exp(-lambda t), each coherence amplitude is expressed through
population amplitudes:

    A_mm' = C_mm' (A_mm - A_m'm') + sum_kl D_mm',kl A_kl

and chaining the D's gives the F (population-difference) and G (population)
series. Substituting back yields an effective rate matrix on populations whose
slowest eigenvalue must equal lambda again.

All functions take the tensor and Hamiltonian in one common basis and a list of
doublet pairs (index pairs into that basis).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .nonsecular import SolverError, population_indices
from .tensor import RedfieldTensor, build_generator, hamiltonian_superop

DEFAULT_MAX_ORDER = 8
DEFAULT_TERM_TOL = 1e-10


class ResonanceError(SolverError):
    """A C/D denominator vanishes; the semi-secular fallback is the way out."""


class SeriesDivergence(SolverError):
    """Per-order term norms grew between consecutive orders."""


def coherence_list(pairs) -> list:
    out = []
    for m, mp in pairs:
        out += [(m, mp), (mp, m)]
    return out


def _tensor_matrix(R):
    return R.matrix if isinstance(R, RedfieldTensor) else np.asarray(R)


@dataclass
class ReductionCoefficients:
    lam: float
    coherences: list
    C: np.ndarray            # (nc,)
    Dp: np.ndarray           # (nc, N): D_q,kk
    Dc: np.ndarray           # (nc, nc): D_q,q' for coherences of other doublets
    Kpc: np.ndarray          # (N, nc): R'_{mm,q}, feeds coherences back into populations
    Gpp: np.ndarray          # (N, N): R_{mm,kk}

    @property
    def dim(self) -> int:
        return self.Dp.shape[1]

    def index(self, m, mp) -> int:
        return self.coherences.index((m, mp))

    def C_of(self, m, mp) -> complex:
        return self.C[self.index(m, mp)]

    def D_of(self, m, mp, k, l) -> complex:
        q = self.index(m, mp)
        if k == l:
            return self.Dp[q, k]
        return self.Dc[q, self.index(k, l)]

    def E(self) -> np.ndarray:
        """Map from populations to the population difference of each coherence's doublet."""
        nc, N = len(self.coherences), self.dim
        E = np.zeros((nc, N))
        for q, (m, mp) in enumerate(self.coherences):
            E[q, m], E[q, mp] = 1.0, -1.0
        return E


def _pair_blocks(R4, G4, m, mp, lam, guard):
    Rp = G4[m, mp, m, mp] + lam
    r = R4[m, mp, mp, m]
    den = abs(Rp) ** 2 - abs(r) ** 2
    if abs(den) < guard * (abs(Rp) ** 2 + abs(r) ** 2) or abs(Rp) == 0:
        raise ResonanceError(
            f"resonant denominator for coherence ({m},{mp}) at lambda={lam:.6g}; "
            "use the semi-secular solver instead",
            denominator=den, lam=lam,
        )
    # 1 / ((1 - |r|^2/|Rp|^2) Rp) written without the intermediate ratio
    pref = np.conj(Rp) / den
    return Rp, r, pref


def compute_coefficients(R, H, pairs, lam: float = 0.0, guard: float = 1e-8) -> ReductionCoefficients:
    """C and D for every intra-doublet coherence at the given lambda."""
    H = np.asarray(H)
    N = H.shape[0]
    Rm = _tensor_matrix(R)
    G = Rm + hamiltonian_superop(H)
    R4, G4 = Rm.reshape(N, N, N, N), G.reshape(N, N, N, N)
    coh = coherence_list(pairs)
    nc = len(coh)
    C = np.zeros(nc, dtype=complex)
    Dp = np.zeros((nc, N), dtype=complex)
    Dc = np.zeros((nc, nc), dtype=complex)
    kk = np.arange(N)
    ck = np.array([c[0] for c in coh], dtype=int)
    cl = np.array([c[1] for c in coh], dtype=int)
    for q, (m, mp) in enumerate(coh):
        Rp, r, pref = _pair_blocks(R4, G4, m, mp, lam, guard)
        C[q] = -1j * pref * (r * H[mp, m] / np.conj(Rp) + H[m, mp])
        Dp[q] = pref * (r * R4[mp, m, kk, kk] / np.conj(Rp) - R4[m, mp, kk, kk])
        if nc:
            row = pref * (r * R4[mp, m, ck, cl] / np.conj(Rp) - R4[m, mp, ck, cl])
            own = np.array([{k, l} == {m, mp} for k, l in coh])
            row[own] = 0.0
            Dc[q] = row
    p = population_indices(N)
    qidx = np.array([m * N + mp for m, mp in coh], dtype=int)
    Kpc = G[np.ix_(p, qidx)] if nc else np.zeros((N, 0), dtype=complex)
    return ReductionCoefficients(float(lam), coh, C, Dp, Dc, Kpc, Rm[np.ix_(p, p)])


def compute_C(m, mp, R, H, lam: float = 0.0, guard: float = 1e-8) -> complex:
    H = np.asarray(H)
    N = H.shape[0]
    Rm = _tensor_matrix(R)
    R4 = Rm.reshape(N, N, N, N)
    G4 = (Rm + hamiltonian_superop(H)).reshape(N, N, N, N)
    Rp, r, pref = _pair_blocks(R4, G4, m, mp, lam, guard)
    return complex(-1j * pref * (r * H[mp, m] / np.conj(Rp) + H[m, mp]))


def compute_D(m, mp, k, l, R, H, lam: float = 0.0, guard: float = 1e-8) -> complex:
    H = np.asarray(H)
    N = H.shape[0]
    Rm = _tensor_matrix(R)
    R4 = Rm.reshape(N, N, N, N)
    G4 = (Rm + hamiltonian_superop(H)).reshape(N, N, N, N)
    Rp, r, pref = _pair_blocks(R4, G4, m, mp, lam, guard)
    return complex(pref * (r * R4[mp, m, k, l] / np.conj(Rp) - R4[m, mp, k, l]))


@dataclass
class SeriesTables:
    F: np.ndarray            # (nc, nc)
    G: np.ndarray            # (nc, N)
    order: int
    norms: np.ndarray        # norm of each order's contribution to the rate matrix
    truncation_bound: float
    coherences: list
    converged: bool


def compute_FG(coeffs: ReductionCoefficients, max_order: int = DEFAULT_MAX_ORDER,
               term_tol: float | None = DEFAULT_TERM_TOL, floor: float = 1e-12) -> SeriesTables:
    """Partial sums F = sum_j Dc^j diag(C), G = sum_j Dc^j Dp.

    Each order is measured by the Frobenius norm of its [F | G] term. With
    ``term_tol`` set, summation stops once that norm falls below ``term_tol``
    times the order-0 norm; ``term_tol=None`` sums exactly ``max_order`` orders.
    F and G are dimensionless, so norms below the absolute ``floor`` count as
    converged and are exempt from the monotonicity check.
    """
    nc = len(coeffs.coherences)
    T = np.hstack([np.diag(coeffs.C), coeffs.Dp])
    acc = T.copy()
    norms = [np.linalg.norm(T)]
    converged = term_tol is not None and norms[0] <= floor
    order = 0
    while order < max_order and not converged and nc:
        T = coeffs.Dc @ T
        order += 1
        n = np.linalg.norm(T)
        if n > norms[-1] * (1 + 1e-9) and n > floor:
            raise SeriesDivergence(
                f"series term norm grew from {norms[-1]:.3e} to {n:.3e} at order {order}",
                norms=norms + [n],
            )
        norms.append(n)
        acc += T
        if term_tol is not None and (n <= term_tol * norms[0] or n <= floor):
            converged = True
    return SeriesTables(acc[:, :nc], acc[:, nc:], order, np.array(norms), float(norms[-1]),
                        list(coeffs.coherences), bool(converged or not nc))


@dataclass
class RateSet:
    tunnel: np.ndarray       # Gamma_m^k, (N, N); zero rows for singlets
    secular: np.ndarray      # R_mm,kk
    corr: np.ndarray         # Gamma^(corr)_mk
    imag_residue: float = 0.0

    def matrix(self) -> np.ndarray:
        return self.tunnel + self.secular + self.corr


def _fdiff(F, coh, N):
    """Fdiff[q, k] = F_q,kk' - F_q,k'k for doublet states k; zero for singlets."""
    out = np.zeros((F.shape[0], N), dtype=complex)
    for i, (k, kp) in enumerate(coh):
        out[:, k] += F[:, i]
        out[:, kp] -= F[:, i]
    return out


def _check_real(name, X, tol, scale=0.0):
    scale = max(np.abs(X).max() if X.size else 0.0, scale, 1e-300)
    resid = np.abs(X.imag).max() / scale if X.size else 0.0
    if resid > tol:
        raise SolverError(f"{name} has imaginary residue {resid:.3e} (relative)", residue=resid)
    return resid


def compute_rates(series: SeriesTables, R, H, pairs, real_tol: float = 1e-8) -> RateSet:
    """Tunneling rates Gamma_m^k and corrections Gamma^(corr)_mk from the series tables."""
    H = np.asarray(H)
    N = H.shape[0]
    Rm = _tensor_matrix(R)
    R4 = Rm.reshape(N, N, N, N)
    coh = series.coherences
    Fd = _fdiff(series.F, coh, N)
    tun = np.zeros((N, N), dtype=complex)
    corr = np.zeros((N, N), dtype=complex)
    pos = {c: i for i, c in enumerate(coh)}
    for m, mp in [c for c in coh]:
        q1, q2 = pos[(m, mp)], pos[(mp, m)]
        tun[m] = 1j * (H[mp, m] * Fd[q1] - H[m, mp] * Fd[q2])
        corr[m] += 1j * (H[mp, m] * series.G[q1] - H[m, mp] * series.G[q2])
    Rpc = np.array([[R4[m, m, k, l] for (k, l) in coh] for m in range(N)]).reshape(N, len(coh))
    corr += Rpc @ (series.G + Fd)
    sec = R4[np.arange(N), np.arange(N)][:, np.arange(N), np.arange(N)]
    r3 = _check_real("secular rates", sec, real_tol)
    # residues are judged against the secular rate scale so round-off on exact zeros passes
    ref = 1e-6 * np.abs(sec).max()
    r1 = _check_real("tunneling rates", tun, real_tol, ref)
    r2 = _check_real("rate corrections", corr, real_tol, ref)
    return RateSet(tun.real.copy(), sec.real.copy(), corr.real.copy(), max(r1, r2, r3))


def zeroth_order_rates(coeffs: ReductionCoefficients, R, H, real_tol: float = 1e-8) -> RateSet:
    """Zeroth-order rates written directly in C and D.

    Gamma_m^m'(0) = -i(H_m'm C_mm' + H_mm' C_m'm), other Gamma_m^k = 0, and
    Gamma^(corr)(0)_mk = [i H_m'm D_mm',kk + R_mm,kk' C_kk' + sum_n R_mm,nn' D_nn',kk] + c.c.
    with the sum over one representative n per doublet.
    """
    H = np.asarray(H)
    N = H.shape[0]
    R4 = _tensor_matrix(R).reshape(N, N, N, N)
    coh = coeffs.coherences
    partner = {m: mp for m, mp in coh}
    reps = [coh[i] for i in range(0, len(coh), 2)]
    tun = np.zeros((N, N), dtype=complex)
    corr = np.zeros((N, N), dtype=complex)
    for m in range(N):
        if m in partner:
            mp = partner[m]
            val = -1j * (H[mp, m] * coeffs.C_of(m, mp) + H[m, mp] * coeffs.C_of(mp, m))
            tun[m, mp], tun[m, m] = val, -val
        for k in range(N):
            x = 0j
            if m in partner:
                x += 1j * H[partner[m], m] * coeffs.D_of(m, partner[m], k, k)
            if k in partner:
                x += R4[m, m, k, partner[k]] * coeffs.C_of(k, partner[k])
            for n, np_ in reps:
                x += R4[m, m, n, np_] * coeffs.D_of(n, np_, k, k)
            corr[m, k] = x + np.conj(x)
    sec = np.array([[R4[m, m, k, k] for k in range(N)] for m in range(N)])
    ref = 1e-6 * np.abs(sec).max()
    r1 = _check_real("tunneling rates", tun, real_tol, ref)
    r2 = _check_real("rate corrections", corr, real_tol, ref)
    return RateSet(tun.real.copy(), sec.real.copy(), corr.real.copy(), max(r1, r2))


def assemble_effective_generator(rates: RateSet, tol: float = 1e-10) -> np.ndarray:
    """Population rate matrix; columns must sum to zero."""
    M = rates.matrix()
    scale = max(np.abs(M).max(), 1e-300)
    viol = np.abs(M.sum(axis=0)).max() / scale
    if viol > tol:
        raise SolverError(f"effective generator loses population (column sum {viol:.3e})", violation=viol)
    return M


def slowest_rate(M) -> tuple:
    """(-Re mu, mu) of the slowest non-stationary eigenvalue of a population rate matrix.

    The rate is signed: a growing mode gives a negative rate, so it can never
    satisfy lambda = rate for lambda > 0.
    """
    w = np.linalg.eigvals(M)
    # the smallest |mu| is the stationary state; anything at roundoff level joins it
    tol = 1e-13 * max(np.abs(w).max(), 1e-300)
    keep = np.abs(w) >= tol
    keep[np.argmin(np.abs(w))] = False
    w = w[keep]
    if len(w) == 0:
        raise SolverError("rate matrix has no decaying mode")
    i = int(np.lexsort((np.abs(w.imag), np.abs(w.real)))[0])
    return float(-w[i].real), complex(w[i])


def schur_rate_matrix(R, H, pairs, lam: float) -> np.ndarray:
    """Exact elimination of the intra-doublet coherences at fixed lambda (all orders at once)."""
    H = np.asarray(H)
    N = H.shape[0]
    G = build_generator(R if isinstance(R, RedfieldTensor) else RedfieldTensor(np.asarray(R)), H)
    p = population_indices(N)
    c = np.array([m * N + mp for m, mp in coherence_list(pairs)], dtype=int)
    if len(c) == 0:
        return G[np.ix_(p, p)]
    Gcc = G[np.ix_(c, c)] + lam * np.eye(len(c))
    return G[np.ix_(p, p)] - G[np.ix_(p, c)] @ np.linalg.solve(Gcc, G[np.ix_(c, p)])


@dataclass
class ReducedEvaluation:
    lam_in: float
    rate: float
    eigenvalue: complex
    matrix: np.ndarray
    coeffs: ReductionCoefficients
    series: SeriesTables
    rates: RateSet


def evaluate(R, H, pairs, lam, order="adaptive", term_tol=DEFAULT_TERM_TOL,
             max_order=DEFAULT_MAX_ORDER) -> ReducedEvaluation:
    """One pass: coefficients at lam, series, rates, effective matrix and its slow rate."""
    co = compute_coefficients(R, H, pairs, lam)
    if order == "adaptive":
        se = compute_FG(co, max_order, term_tol)
    else:
        se = compute_FG(co, int(order), None)
    rs = compute_rates(se, R, H, pairs)
    M = assemble_effective_generator(rs)
    mu, ev = slowest_rate(M)
    return ReducedEvaluation(float(lam), mu, ev, M, co, se, rs)


@dataclass
class SelfConsistentSolution:
    lam: float
    iterations: int
    residual: float
    matrix: np.ndarray
    history: list
    method: str
    final: ReducedEvaluation = field(repr=False)
    slope: float = np.nan
    lambda_bound: float = np.nan

    @property
    def order(self) -> int:
        return self.final.series.order

    @property
    def truncation_bound(self) -> float:
        return self.final.series.truncation_bound


def _bracket_solve(fn, mu0, tol, span=1e3, points=121):
    """Smallest root of mu(lam) - lam on a geometric grid around mu0, rejecting poles."""
    grid = np.concatenate([[0.0], mu0 * np.geomspace(1 / span, span, points)])
    vals = []
    for x in grid:
        try:
            vals.append(fn(x).rate - x)
        except SolverError:
            vals.append(np.nan)
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
            continue
        try:
            root = brentq(lambda x: fn(x).rate - x, a, b, xtol=1e-300, rtol=max(tol, 4e-16), maxiter=200)
        except (SolverError, ValueError, RuntimeError):
            continue
        ev = fn(root)
        if abs(ev.rate - root) <= 1e3 * max(tol, 1e-14) * max(root, 1e-300):
            return root, ev
    raise SolverError("no self-consistent root found by bracketing",
                      grid=grid.tolist(), residuals=vals)


def solve_self_consistent(R, H, pairs, order="adaptive", tol: float = 1e-10, max_iter: int = 200,
                          damping: float = 1.0, fallback: bool = True,
                          term_tol: float = DEFAULT_TERM_TOL, max_order: int = DEFAULT_MAX_ORDER,
                          lam0: float = 0.0) -> SelfConsistentSolution:
    """lambda_{n+1} = slow rate of the effective generator built at lambda_n, from lambda_0 = 0.

    A damping factor eta mixes new and old values. Convergence is relative
    change below ``tol``, or below the eigenvalue round-off floor
    64 eps ||M|| / lambda when that is larger. When the plain iteration
    oscillates or stalls and ``fallback`` is set, the fixed point is located
    by bracketing mu(lambda) - lambda instead.
    """
    def fn(x):
        return evaluate(R, H, pairs, x, order, term_tol, max_order)

    lam = float(lam0)
    history = []
    failure = None
    ev = None
    for it in range(1, max_iter + 1):
        try:
            ev = fn(lam)
        except SolverError as exc:
            failure = exc
            break
        if ev.rate <= 0:
            failure = SolverError("effective rate matrix has a non-decaying mode", lam=lam, mu=ev.eigenvalue)
            break
        new = (1 - damping) * lam + damping * ev.rate
        history.append(new)
        resid = abs(new - lam) / max(abs(new), 1e-300)
        # the slow eigenvalue of M is only resolved to about eps * ||M||
        noise = 64 * np.finfo(float).eps * np.linalg.norm(ev.matrix, 2) / max(abs(new), 1e-300)
        if resid < max(tol, noise):
            lam = new
            ev = fn(lam)
            return _finish(fn, lam, it, resid, history, "fixed-point", ev)
        if fallback and len(history) >= 10:
            steps = np.abs(np.diff(history[-7:]))
            if np.all(steps[1:] >= 0.98 * steps[:-1]):
                failure = SolverError("fixed-point iteration is not contracting", history=history)
                break
        if len(history) >= 4:
            a, b, c, d = history[-4:]
            if abs(d - b) < 1e-3 * tol * abs(d) + 1e-300 and abs(c - a) < 1e-3 * tol * abs(c) + 1e-300:
                failure = SolverError("fixed-point iteration oscillates with period 2; try damping",
                                      history=history)
                break
        lam = new
    else:
        failure = SolverError(f"no convergence in {max_iter} iterations", history=history)

    if not fallback:
        raise failure
    mu0 = history[0] if history else None
    if mu0 is None or not np.isfinite(mu0) or mu0 <= 0:
        raise failure
    try:
        root, ev = _bracket_solve(fn, mu0, tol)
    except SolverError as exc:
        exc.diagnostics["iteration_failure"] = str(failure)
        raise
    resid = abs(ev.rate - root) / max(root, 1e-300)
    return _finish(fn, root, len(history), resid, history + [root], "bracket", ev)


def _finish(fn, lam, its, resid, history, method, ev) -> SelfConsistentSolution:
    sol = SelfConsistentSolution(lam, its, resid, ev.matrix, history, method, ev)
    h = 1e-6 * max(lam, 1e-300)
    try:
        sol.slope = (fn(lam + h).rate - fn(max(lam - h, 0.0)).rate) / (lam + h - max(lam - h, 0.0))
    except SolverError:
        sol.slope = np.nan
    w, V = np.linalg.eig(ev.matrix)
    kappa = np.linalg.cond(V)
    damp = abs(1 - sol.slope) if np.isfinite(sol.slope) else 1.0
    # first-order perturbation of the slow eigenvalue by the next series term,
    # amplified through the self-consistency loop by 1/|1 - dmu/dlambda|
    coupling = np.linalg.norm(ev.coeffs.Kpc, 2) if ev.coeffs.Kpc.size else 0.0
    sol.lambda_bound = float(kappa * coupling * ev.series.truncation_bound / max(damp, 1e-3))
    return sol


@dataclass
class AmplitudeSet:
    populations: np.ndarray
    coherences: dict


def reconstruct_offdiagonals(A_diag, series: SeriesTables) -> AmplitudeSet:
    """A_mm' = sum_k [F_mm',kk' (A_kk - A_k'k') + G_mm',kk A_kk] for every kept coherence."""
    A = np.asarray(A_diag)
    N = len(A)
    Fd = _fdiff(series.F, series.coherences, N)
    vals = (Fd + series.G) @ A
    return AmplitudeSet(A.copy(), {c: complex(v) for c, v in zip(series.coherences, vals)})
