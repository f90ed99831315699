"""Exact reference: eigen-decomposition of the full generator R'."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class SolverError(RuntimeError):
    """Numerical failure with a diagnostic payload."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class GeneratorSpectrum:
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    stationary_index: int
    stationary_tol: float
    generator: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.right.shape[0])))


# eigenvalues below this fraction of max|w| count as stationary; the single
# smallest |w| always does
STATIONARY_REL_TOL = 1e-13
# a smallest |w| above this fraction means trace is not conserved
STATIONARY_SANITY = 1e-8


def _stationary(w, rel_tol=STATIONARY_REL_TOL) -> tuple:
    return int(np.argmin(np.abs(w))), rel_tol * max(np.abs(w).max(), 1e-300)


def population_indices(N) -> np.ndarray:
    return np.arange(N) * (N + 1)


def doublet_sector(N, pairs) -> np.ndarray:
    """Flat indices of all populations plus both intra-doublet coherences."""
    idx = list(population_indices(N))
    for m, mp in pairs:
        idx += [m * N + mp, mp * N + m]
    return np.array(idx)


def spectrum(G, stationary_rel_tol: float = STATIONARY_REL_TOL) -> GeneratorSpectrum:
    """Full eigen-decomposition sorted by |Re lambda| (then |Im|, then index)."""
    G = np.asarray(G, dtype=complex)
    if not np.all(np.isfinite(G)):
        raise SolverError("generator has non-finite entries")
    try:
        w, vl, vr = sla.eig(G, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"eigensolver failed: {exc}") from exc
    resid = np.abs(G @ vr - vr * w).max() / max(np.abs(G).max(), 1e-300)
    if not np.isfinite(resid) or resid > 1e-8:
        raise SolverError("eigensolver residual too large", residual=resid)
    order = np.lexsort((np.arange(len(w)), np.round(np.abs(w.imag), 14), np.round(np.abs(w.real), 14)))
    w, vl, vr = w[order], vl[:, order], vr[:, order]
    # bi-orthonormal: vl^H vr = 1 on the diagonal
    vl = vl / np.conj(np.einsum("ij,ij->j", vl.conj(), vr))
    idx, tol = _stationary(w, stationary_rel_tol)
    if abs(w[idx]) > STATIONARY_SANITY * max(np.abs(w).max(), 1e-300):
        raise SolverError("no stationary eigenvalue found", smallest=w[idx])
    return GeneratorSpectrum(w, vr, vl, idx, tol, G)


@dataclass
class SlowMode:
    rate: float
    eigenvalue: complex
    index: int
    vector: np.ndarray
    overlap: float
    gap_ratio: float
    stationary_count: int


def population_weights(V, bases=()) -> np.ndarray:
    """Population-sector weight of each mode (column of V), maximized over bases.

    The computational basis always counts; each unitary U in ``bases`` adds the
    weight of U^H M U, with M the mode reshaped to a matrix.
    """
    N = int(round(np.sqrt(V.shape[0])))
    p = population_indices(N)
    tot = np.sum(np.abs(V) ** 2, axis=0)
    best = np.sum(np.abs(V[p]) ** 2, axis=0) / tot
    M = V.T.reshape(-1, N, N)
    for U in bases:
        U = np.asarray(U)
        d = np.einsum("ai,qab,bi->qi", U.conj(), M, U)
        best = np.maximum(best, np.sum(np.abs(d) ** 2, axis=1) / tot)
    return best


def slow_rate(sp: GeneratorSpectrum, overlap_threshold: float = 0.5, sector=None, bases=()) -> SlowMode:
    """Slowest non-stationary mode whose weight on ``sector`` is at least ``overlap_threshold``.

    ``sector`` is a list of flat indices. Without it the weight is the population
    weight, maximized over the computational basis and the unitaries in ``bases``.
    Ties in |Re| (within 1e-12 relative) go to the larger overlap, then the smaller |Im|.
    """
    V = sp.right
    if sector is None:
        weights = population_weights(V, bases)
    else:
        sector = np.asarray(sector)
        weights = np.sum(np.abs(V[sector]) ** 2, axis=0) / np.sum(np.abs(V) ** 2, axis=0)
    w = sp.eigenvalues
    moving = np.abs(w) >= sp.stationary_tol
    moving[sp.stationary_index] = False
    ok = np.flatnonzero(moving & (weights >= overlap_threshold))
    if len(ok) == 0:
        cand = np.flatnonzero(moving)
        raise SolverError(
            "no mode passes the population-overlap filter",
            unfiltered_min=float(np.abs(w[cand[0]].real)) if len(cand) else None,
        )
    re = np.abs(w[ok].real)
    best = re.min()
    tied = ok[np.abs(re - best) <= 1e-12 * max(best, 1e-300)]
    pick = min(tied, key=lambda i: (-weights[i], abs(w[i].imag), i))
    rest = np.abs(w[ok].real)
    rest = rest[rest > best * (1 + 1e-9)]
    gap = float(rest.min() / best) if len(rest) and best > 0 else np.inf
    return SlowMode(float(abs(w[pick].real)), complex(w[pick]), int(pick), V[:, pick],
                    float(weights[pick]), gap, int(np.count_nonzero(~moving)))


def stationary_state(sp: GeneratorSpectrum) -> np.ndarray:
    N = sp.dim
    small = np.abs(sp.eigenvalues) < sp.stationary_tol
    small[sp.stationary_index] = True
    n_stat = np.count_nonzero(small)
    if n_stat != 1:
        raise SolverError(f"stationary state is not unique ({n_stat} zero modes)", count=n_stat)
    rho = sp.right[:, sp.stationary_index].reshape(N, N)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho)


def propagate(rho0, G, times, cond_bound: float = 1e10) -> np.ndarray:
    """rho(t) for each t via the spectral decomposition of G; returns shape (len(times), N, N)."""
    rho0 = np.asarray(rho0, dtype=complex)
    N = rho0.shape[0]
    w, V = np.linalg.eig(np.asarray(G, dtype=complex))
    cond = np.linalg.cond(V)
    if cond > cond_bound:
        raise SolverError("generator is (numerically) defective", condition=cond)
    c = np.linalg.solve(V, rho0.ravel())
    t = np.asarray(times, dtype=float)
    traj = (V @ (c[:, None] * np.exp(np.outer(w, t)))).T
    out = traj.reshape(len(t), N, N)
    out[t == 0] = rho0
    return out


def sector_generator(G, sector) -> np.ndarray:
    return np.asarray(G)[np.ix_(sector, sector)]


def semisecular_rate(G, pairs, overlap_threshold: float = 0.5, sector=None, bases=()) -> SlowMode:
    """Slow mode of the generator restricted to populations and intra-doublet coherences.

    The overlap filter is the one of :func:`slow_rate`.
    """
    N = int(round(np.sqrt(G.shape[0])))
    sec = doublet_sector(N, pairs)
    Gs = sector_generator(G, sec)
    # embed back so population indices keep their meaning
    w, V = np.linalg.eig(Gs)
    full = np.zeros((N * N, len(w)), dtype=complex)
    full[sec] = V
    order = np.lexsort((np.arange(len(w)), np.round(np.abs(w.imag), 14), np.round(np.abs(w.real), 14)))
    idx, tol = _stationary(w[order])
    sp = GeneratorSpectrum(w[order], full[:, order], None, idx, tol, None)
    return slow_rate(sp, overlap_threshold, sector, bases)


def secular_rate(G, overlap_threshold: float = 0.5) -> SlowMode:
    """Slow mode of the plain secular (population-only) rate matrix."""
    N = int(round(np.sqrt(G.shape[0])))
    p = population_indices(N)
    M = np.real_if_close(np.asarray(G)[np.ix_(p, p)], tol=1e6)
    w, V = np.linalg.eig(M)
    full = np.zeros((N * N, N), dtype=complex)
    full[p] = V
    order = np.lexsort((np.arange(N), np.round(np.abs(w.imag), 14), np.round(np.abs(w.real), 14)))
    idx, tol = _stationary(w[order])
    sp = GeneratorSpectrum(w[order].astype(complex), full[:, order], None, idx, tol, None)
    return slow_rate(sp, overlap_threshold)
