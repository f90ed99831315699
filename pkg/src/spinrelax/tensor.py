"""Redfield tensor in the eigenbasis, basis changes, the generator R' and rate views.

Flattening is row-major: element (m, n) of a density matrix sits at index m*N + n,
so a tensor R[m, n, k, l] is stored as the N^2 x N^2 matrix R[m*N+n, k*N+l].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import Bath


@dataclass(frozen=True)
class RedfieldTensor:
    matrix: np.ndarray
    basis: str = "eigen"
    # columns are basis states written in the eigenbasis
    frame: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def as4(self) -> np.ndarray:
        N = self.dim
        return self.matrix.reshape(N, N, N, N)

    def element(self, m, n, k, l) -> complex:
        N = self.dim
        return self.matrix[m * N + n, k * N + l]


def spectrum_matrix(energies, bath: Bath, temperature) -> np.ndarray:
    """Sm[i, j] = S(e_j - e_i): spectrum at the energy released by a j -> i jump."""
    e = np.asarray(energies)
    w = e[None, :] - e[:, None]
    return bath.spectrum(w.ravel(), temperature).reshape(w.shape)


def build_redfield_eigenbasis(energies, vectors, bath: Bath, temperature) -> RedfieldTensor:
    """Redfield tensor from golden-rule bath sums, without principal-value shifts.

    With A the coupling in the eigenbasis and Sm as in :func:`spectrum_matrix`,

        R[a,b,c,d] = -1/2 d_bd sum_g A_ag A_gc Sm_gc - 1/2 d_ac sum_g A_dg A_gb Sm_gd
                     + 1/2 A_ac A_db (Sm_bd + Sm_ac)

    summed over coupling channels with weight strength^2.
    """
    e = np.asarray(energies, dtype=float)
    U = np.asarray(vectors)
    N = len(e)
    Sm = spectrum_matrix(e, bath, temperature)
    I = np.eye(N)
    R = np.zeros((N, N, N, N), dtype=complex)
    for c in bath.couplings:
        A = U.conj().T @ c.matrix @ U
        X = A @ (A * Sm)        # X[a,c] = sum_g A_ag A_gc Sm_gc
        Y = (A * Sm.T) @ A      # Y[d,b] = sum_g A_dg A_gb Sm_gd
        term = -0.5 * np.einsum("ac,bd->abcd", X, I) - 0.5 * np.einsum("ac,db->abcd", I, Y)
        term += 0.5 * np.einsum("ac,db->abcd", A, A) * (Sm[None, :, None, :] + Sm[:, None, :, None])
        R += c.strength**2 * term
    return RedfieldTensor(R.reshape(N * N, N * N), "eigen", np.eye(N, dtype=complex))


def superop_transform(U) -> tuple:
    """Left/right factors T, T^-1 with R_new = T R_old T^-1 for states |new> = sum |old> U."""
    return np.kron(U.conj().T, U.T), np.kron(U, U.conj())


def check_unitary(U, tol=1e-10) -> None:
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("transform must be a square matrix")
    err = np.abs(U.conj().T @ U - np.eye(len(U))).max()
    if err > tol:
        raise ValueError(f"transform is not unitary (|U^+U - 1| = {err:.3e})")


def transform_tensor(R: RedfieldTensor, U, basis: str = "custom") -> RedfieldTensor:
    """Re-express R in the basis whose states are the columns of U (written in R's basis)."""
    check_unitary(U)
    U = np.asarray(U, dtype=complex)
    if len(U) != R.dim:
        raise ValueError("dimension mismatch between tensor and transform")
    T, Tinv = superop_transform(U)
    frame = U if R.frame is None else R.frame @ U
    return RedfieldTensor(T @ R.matrix @ Tinv, basis, frame)


def transform_operator(H, U) -> np.ndarray:
    return np.asarray(U).conj().T @ H @ U


def hamiltonian_superop(H) -> np.ndarray:
    """i(d_mk H_ln - H_mk d_ln) as an N^2 x N^2 matrix."""
    N = H.shape[0]
    I = np.eye(N)
    return 1j * (np.kron(I, H.T) - np.kron(H, I))


def build_generator(R: RedfieldTensor, H) -> np.ndarray:
    """R'_{mn,kl} = R_{mn,kl} + i(d_mk H_ln - H_mk d_ln)."""
    H = np.asarray(H)
    if H.shape != (R.dim, R.dim):
        raise ValueError(f"Hamiltonian shape {H.shape} does not match tensor dimension {R.dim}")
    return R.matrix + hamiltonian_superop(H)


def population_rates(R: RedfieldTensor) -> np.ndarray:
    """Gamma[m, n] = R_{mm,nn}: rate from n into m (diagonal holds minus the loss)."""
    N = R.dim
    idx = np.arange(N) * (N + 1)
    return R.matrix[np.ix_(idx, idx)]


def dephasing(R: RedfieldTensor) -> np.ndarray:
    """gamma[m, n] = -R_{mn,mn}; real part damps, imaginary part shifts."""
    N = R.dim
    return -np.diag(R.matrix).reshape(N, N)


@dataclass
class PropertyReport:
    conjugation: float
    trace: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.conjugation < self.tol and self.trace < self.tol


def conjugation_violation(M) -> float:
    """max |M*_{mn,kl} - M_{nm,lk}|."""
    N = int(round(np.sqrt(M.shape[0])))
    M4 = M.reshape(N, N, N, N)
    return float(np.abs(M4.conj() - M4.transpose(1, 0, 3, 2)).max())


def trace_violation(M) -> float:
    """max over (k, l) of |sum_m M_{mm,kl}|."""
    N = int(round(np.sqrt(M.shape[0])))
    return float(np.abs(np.einsum("mmkl->kl", M.reshape(N, N, N, N))).max())


def verify_tensor_properties(R, tol: float = 1e-12, relative: bool = True) -> PropertyReport:
    M = R.matrix if isinstance(R, RedfieldTensor) else np.asarray(R)
    scale = max(np.abs(M).max(), np.finfo(float).tiny) if relative else 1.0
    return PropertyReport(conjugation_violation(M) / scale, trace_violation(M) / scale, tol)


def dump_tensor(R: RedfieldTensor, path) -> None:
    """Text dump: one row per tensor row, ``re im`` pairs with 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in R.matrix:
            fh.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) + "\n")


def load_tensor(path, basis: str = "custom") -> RedfieldTensor:
    raw = np.loadtxt(path, ndmin=2)
    return RedfieldTensor(raw[:, 0::2] + 1j * raw[:, 1::2], basis)
