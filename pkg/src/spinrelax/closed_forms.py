"""Closed-form zeroth-order rates in the localized and eigen bases.

In the localized basis each doublet block of H is [[W/2, D/2], [D/2, -W/2]] and
the coherence denominator is written with

    z = (gamma' - lambda) + i (W + gamma''),   r = R_mm',m'm,
    den = |z|^2 - |r|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonsecular import SolverError
from .tensor import RedfieldTensor


def _R4(R):
    M = R.matrix if isinstance(R, RedfieldTensor) else np.asarray(R)
    N = int(round(np.sqrt(M.shape[0])))
    return M.reshape(N, N, N, N)


def _z_r_den(R4, m, mp, W, lam):
    g = -R4[m, mp, m, mp]
    z = (g.real - lam) + 1j * (W + g.imag)
    r = R4[m, mp, mp, m]
    return z, r, abs(z) ** 2 - abs(r) ** 2


def localized_C(R, m, mp, W, Delta, lam=0.0) -> complex:
    z, r, den = _z_r_den(_R4(R), m, mp, W, lam)
    return 0.5j * Delta * (np.conj(z) - r) / den


def localized_D(R, m, mp, k, l, W, lam=0.0) -> complex:
    R4 = _R4(R)
    z, r, den = _z_r_den(R4, m, mp, W, lam)
    return (r * R4[mp, m, k, l] + R4[m, mp, k, l] * np.conj(z)) / den


def localized_tunnel(R, m, mp, W, Delta, lam=0.0) -> float:
    """Zeroth-order tunneling rate Gamma_m^m'(0) inside one doublet."""
    z, r, den = _z_r_den(_R4(R), m, mp, W, lam)
    return float(0.5 * Delta**2 * (z.real - r.real) / den)


def incoherent_rate(Delta, W, gamma1, gamma2=0.0) -> float:
    """(Delta^2/2) gamma' / (gamma'^2 + (gamma'' + W)^2)."""
    if gamma1 <= 0:
        raise ValueError("incoherent rate needs gamma' > 0")
    return 0.5 * Delta**2 * gamma1 / (gamma1**2 + (gamma2 + W) ** 2)


def localized_correction(R, pairs, W, Delta, lam=0.0) -> np.ndarray:
    """Zeroth-order corrections Gamma^(corr)(0)_mk for all m != k (diagonal left at zero).

    Three pieces, each plus its complex conjugate: the own-doublet D of m, the
    C of k's doublet weighted by R_mm,kk', and the D's of every doublet n
    weighted by R_mm,nn'.
    """
    R4 = _R4(R)
    N = R4.shape[0]
    info = {}
    for i, (a, b) in enumerate(pairs):
        z, r, den = _z_r_den(R4, a, b, W[i], lam)
        info[a] = (b, Delta[i], z, r, den)
        zb, rb, denb = _z_r_den(R4, b, a, -W[i], lam)
        info[b] = (a, Delta[i], zb, rb, denb)
    out = np.zeros((N, N))
    for m in range(N):
        for k in range(N):
            if k == m:
                continue
            x = 0j
            if m in info:
                mp, Dm, z, r, den = info[m]
                x += 0.5j * Dm * (r * R4[mp, m, k, k] + R4[m, mp, k, k] * np.conj(z)) / den
            if k in info:
                kp, Dk, z, r, den = info[k]
                x += 0.5j * Dk * R4[m, m, k, kp] * (np.conj(z) - r) / den
            for a, b in pairs:
                _, _, z, r, den = info[a]
                x += R4[m, m, a, b] * (r * R4[b, a, k, k] + R4[a, b, k, k] * np.conj(z)) / den
            out[m, k] = 2 * x.real
    return out


@dataclass
class RegimeCheck:
    ratios: dict
    limit: float

    @property
    def ok(self) -> bool:
        return all(v <= self.limit for v in self.ratios.values())


def high_T_regime(R, pairs, factor: float = 10.0) -> RegimeCheck:
    """max(|R_nn',n'n|, |R_n'n,kk|) / |gamma_nn'| per doublet; must be <= 1/factor."""
    R4 = _R4(R)
    N = R4.shape[0]
    ratios = {}
    for a, b in pairs:
        g = abs(R4[a, b, a, b])
        ct = max(abs(R4[a, b, b, a]), max(abs(R4[b, a, k, k]) for k in range(N)))
        ratios[(a, b)] = ct / g if g > 0 else np.inf
    return RegimeCheck(ratios, 1.0 / factor)


def eigen_regime(R, energies, pairs, factor: float = 10.0) -> RegimeCheck:
    """Largest coherence transfer R_aa,gg' (any a) against the ground splitting |w_gg'|.

    The plain secular equation in the eigenbasis needs this ratio <= 1/factor.
    """
    R4 = _R4(R)
    e = np.asarray(energies)
    g, gp = min(pairs, key=lambda p: e[list(p)].mean())
    transfer = max(abs(R4[a, a, g, gp]) for a in range(R4.shape[0]))
    w = abs(e[g] - e[gp])
    return RegimeCheck({(g, gp): transfer / w if w > 0 else np.inf}, 1.0 / factor)


def high_T_correction(R, pairs, W, Delta, factor: float = 10.0, check: bool = True) -> np.ndarray:
    """(i/2)[D_m R_mm',kk / (gamma_mm' + i W_m) + D_k R_mm,kk' / (gamma_kk' + i W_k)] + c.c."""
    if check:
        rc = high_T_regime(R, pairs, factor)
        if not rc.ok:
            raise SolverError("coherence transfer not small against dephasing", ratios=rc.ratios)
    R4 = _R4(R)
    N = R4.shape[0]
    info = {}
    for i, (a, b) in enumerate(pairs):
        info[a] = (b, Delta[i], -R4[a, b, a, b] + 1j * W[i])
        info[b] = (a, Delta[i], -R4[b, a, b, a] - 1j * W[i])
    out = np.zeros((N, N))
    for m in range(N):
        for k in range(N):
            if k == m:
                continue
            x = 0j
            if m in info:
                mp, Dm, den = info[m]
                x += 0.5j * Dm * R4[m, mp, k, k] / den
            if k in info:
                kp, Dk, den = info[k]
                x += 0.5j * Dk * R4[m, m, k, kp] / den
            out[m, k] = 2 * x.real
    return out


def eigenbasis_correction(R, energies, pairs, lam=0.0, ground_only: bool = False) -> np.ndarray:
    """Zeroth-order corrections in the eigenbasis, summed over doublets delta.

    z = (gamma' - lambda) + i(omega + gamma'') with omega = e_delta - e_delta', and
    the denominator |z|^2 - |R_dd',d'd|^2 of the same doublet.
    """
    R4 = _R4(R)
    N = R4.shape[0]
    e = np.asarray(energies)
    use = list(pairs)
    if ground_only:
        use = [min(pairs, key=lambda p: e[list(p)].mean())]
    out = np.zeros((N, N))
    for a in range(N):
        for b in range(N):
            if a == b:
                continue
            x = 0j
            for d, dp in use:
                z, r, den = _z_r_den(R4, d, dp, e[d] - e[dp], lam)
                x += R4[a, a, d, dp] * (r * R4[dp, d, b, b] + R4[d, dp, b, b] * np.conj(z)) / den
            out[a, b] = 2 * x.real
    return out
