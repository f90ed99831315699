"""Harmonic phonon bath: coupling operators, spectral densities and the thermal spectrum.

``temperature`` arguments are k_B T in energy units throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def bose_occupation(omega, temperature):
    """n(w) = 1/(exp(w/kT) - 1); zero at kT = 0. Requires w > 0."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("bose_occupation needs omega > 0")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        return np.zeros_like(omega)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(omega / temperature)


@dataclass(frozen=True)
class SpectralDensity:
    """J(w) for w >= 0.

    ``debye_cubic``: alpha w^3 exp(-w/wc); ``ohmic``: alpha w exp(-w/wc);
    ``tabulated``: linear interpolation of (w, J) samples, zero outside the table.
    """

    form: str = "debye_cubic"
    alpha: float = 1.0
    cutoff: float = 10.0
    table: tuple = ()

    def __post_init__(self):
        if self.form not in ("debye_cubic", "ohmic", "tabulated"):
            raise ValueError(f"unknown spectral density form {self.form!r}")
        if self.form == "tabulated":
            w, J = self._table_arrays()
            if len(w) < 2 or np.any(np.diff(w) <= 0):
                raise ValueError("tabulated density needs >= 2 strictly increasing frequencies")
            if np.any(w < 0) or np.any(J < 0):
                raise ValueError("tabulated density needs w >= 0 and J >= 0")
        elif self.cutoff <= 0 or self.alpha < 0:
            raise ValueError("need cutoff > 0 and alpha >= 0")

    def _table_arrays(self):
        arr = np.asarray(self.table, dtype=float).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]

    @classmethod
    def from_file(cls, path, alpha: float = 1.0) -> "SpectralDensity":
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (omega, J)")
        return cls("tabulated", alpha, 1.0, tuple(map(tuple, data)))

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        if self.form == "debye_cubic":
            return self.alpha * w**3 * np.exp(-w / self.cutoff)
        if self.form == "ohmic":
            return self.alpha * w * np.exp(-w / self.cutoff)
        tw, tJ = self._table_arrays()
        return self.alpha * np.interp(w, tw, tJ, left=0.0, right=0.0)

    def zero_limit(self, temperature) -> float:
        """lim_{w->0+} J(w) (n(w) + 1)."""
        if self.form == "debye_cubic":
            return 0.0
        if self.form == "ohmic":
            return self.alpha * temperature
        tw, tJ = self._table_arrays()
        if tw[0] > 0 or temperature == 0:
            return 0.0
        # J(w) ~ J(0) + J'(0) w, times kT/w
        if tJ[0] != 0:
            return np.inf
        slope = (tJ[1] - tJ[0]) / (tw[1] - tw[0])
        return self.alpha * slope * temperature


def bath_spectrum(J: SpectralDensity, omega, temperature):
    """One-sided thermal spectrum S(w): emission J(w)(n+1) for w > 0, absorption J(|w|) n for w < 0."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty_like(w)
    pos, neg = w > 0, w < 0
    if np.any(pos):
        out[pos] = J(w[pos]) * (_occ(w[pos], temperature) + 1.0)
    if np.any(neg):
        out[neg] = J(-w[neg]) * _occ(-w[neg], temperature)
    zero = ~(pos | neg)
    if np.any(zero):
        if temperature <= 0 and J.form != "debye_cubic":
            raise ValueError("S(0) undefined at zero temperature")
        out[zero] = J.zero_limit(temperature)
    return out if np.ndim(omega) else out[0]


def _occ(w, temperature):
    if temperature == 0:
        return np.zeros_like(w)
    return bose_occupation(w, temperature)


@dataclass(frozen=True)
class CouplingOperator:
    matrix: np.ndarray
    strength: float = 1.0

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        scale = max(np.abs(M).max(), 1.0)
        if np.abs(M - M.conj().T).max() > 1e-12 * scale:
            raise ValueError("coupling operator must be Hermitian")
        object.__setattr__(self, "matrix", M)


@dataclass(frozen=True)
class Bath:
    couplings: Sequence[CouplingOperator]
    density: SpectralDensity

    def spectrum(self, omega, temperature):
        return bath_spectrum(self.density, omega, temperature)


def quadrupolar_couplings(ops: dict, strength: float = 1.0) -> list:
    """The four rank-2 operators that change m_S by one or two units."""
    Sx, Sy, Sz = ops["Sx"], ops["Sy"], ops["Sz"]
    mats = [Sx @ Sz + Sz @ Sx, Sy @ Sz + Sz @ Sy, Sx @ Sx - Sy @ Sy, Sx @ Sy + Sy @ Sx]
    return [CouplingOperator(m, strength) for m in mats]
