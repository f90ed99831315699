"""Giant-spin Hamiltonian, eigensystem, doublet pairing and the localized basis.

Energies are in one user-declared unit (cm^-1 by default) and fields in tesla.
All matrices live in the |S, m_S> basis with m_S descending.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .units import MU_B_CM_PER_T

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class SpinParameters:
    """Parameters of H = D Sz^2 + E (Sx^2 - Sy^2) + g muB B.S + extra terms."""

    S: float
    D: float = 0.0
    E: float = 0.0
    B: tuple = (0.0, 0.0, 0.0)
    g: float = 2.0
    extra_terms: tuple = ()
    mu_b: float = MU_B_CM_PER_T

    def __post_init__(self):
        _check_spin(self.S)
        if len(self.B) != 3:
            raise ValueError("B must be a 3-vector")
        object.__setattr__(self, "B", tuple(float(b) for b in self.B))
        object.__setattr__(self, "extra_terms", tuple(tuple(t) for t in self.extra_terms))
        if abs(self.E) > abs(self.D) / 3 + 1e-15:
            warnings.warn(f"|E|={abs(self.E)} exceeds |D|/3={abs(self.D) / 3}", stacklevel=2)

    @property
    def dim(self) -> int:
        return int(round(2 * self.S + 1))

    def with_field(self, B) -> "SpinParameters":
        return SpinParameters(self.S, self.D, self.E, tuple(B), self.g, self.extra_terms, self.mu_b)


def _check_spin(S) -> None:
    twoS = 2 * float(S)
    if twoS < 1 or abs(twoS - round(twoS)) > 1e-12:
        raise ValueError(f"S must be a positive half-integer, got {S}")


def spin_operators(S) -> dict:
    """Return {"Sx", "Sy", "Sz"} for spin S in the m_S-descending basis."""
    _check_spin(S)
    S = round(2 * float(S)) / 2
    m = np.arange(S, -S - 1, -1)
    N = len(m)
    Sp = np.zeros((N, N), dtype=complex)
    # <m+1|S+|m> sits one row above the m column
    for i in range(1, N):
        Sp[i - 1, i] = np.sqrt(S * (S + 1) - m[i] * (m[i] + 1))
    Sm = Sp.conj().T
    return {
        "Sx": (Sp + Sm) / 2,
        "Sy": (Sp - Sm) / 2j,
        "Sz": np.diag(m).astype(complex),
    }


# alias matching the operation name used elsewhere
build_spin_operators = spin_operators

_FACTOR = re.compile(r"^S([xyzpm])(?:\^(\d+))?$")


def polynomial_operator(expr: str, ops: dict) -> np.ndarray:
    """Evaluate a spin-operator polynomial such as ``"Sx^4 + Sy^4"`` or ``"Sx*Sz + Sz*Sx"``.

    Monomials are ``*``-separated products of Sx, Sy, Sz, Sp (raising), Sm (lowering)
    with optional integer powers,
    each optionally preceded by a numeric factor. Monomials are joined by ``+`` or ``-``.
    """
    N = ops["Sz"].shape[0]
    ops = dict(ops, Sp=ops["Sx"] + 1j * ops["Sy"], Sm=ops["Sx"] - 1j * ops["Sy"])
    total = np.zeros((N, N), dtype=complex)
    text = expr.replace(" ", "")
    if not text:
        raise ValueError("empty operator polynomial")
    for sign, mono in re.findall(r"([+-]?)([^+-]+)", text):
        term = np.eye(N, dtype=complex) * (-1.0 if sign == "-" else 1.0)
        for fac in mono.split("*"):
            hit = _FACTOR.match(fac)
            if hit:
                term = term @ np.linalg.matrix_power(ops["S" + hit.group(1)], int(hit.group(2) or 1))
            else:
                try:
                    term = term * float(fac)
                except ValueError:
                    raise ValueError(f"cannot parse factor {fac!r} in {expr!r}") from None
        total += term
    return total


def build_hamiltonian(p: SpinParameters) -> np.ndarray:
    ops = spin_operators(p.S)
    Sx, Sy, Sz = ops["Sx"], ops["Sy"], ops["Sz"]
    H = p.D * Sz @ Sz + p.E * (Sx @ Sx - Sy @ Sy)
    H = H + p.g * p.mu_b * (p.B[0] * Sx + p.B[1] * Sy + p.B[2] * Sz)
    for poly, coef in p.extra_terms:
        op = poly if isinstance(poly, np.ndarray) else polynomial_operator(poly, ops)
        H = H + coef * op
    check_hermitian(H)
    return H


def check_hermitian(H, tol=HERMITIAN_TOL) -> float:
    scale = max(np.abs(H).max(), 1.0)
    err = np.abs(H - H.conj().T).max() / scale
    if err > tol:
        raise ValueError(f"matrix is not Hermitian (relative violation {err:.3e})")
    return err


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    vectors: np.ndarray
    hamiltonian: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.energies)


def _degenerate_blocks(e, tol):
    blocks, start = [], 0
    for i in range(1, len(e) + 1):
        if i == len(e) or e[i] - e[i - 1] > tol:
            blocks.append(list(range(start, i)))
            start = i
    return blocks


def _fix_phase(v):
    # largest component real and positive; argmax returns the lowest index on ties
    mags = np.round(np.abs(v), 12)
    k = int(np.argmax(mags))
    return v * np.exp(-1j * np.angle(v[k]))


def diagonalize(H, degeneracy_tol=DEGENERACY_TOL) -> EigenSystem:
    """Eigen-decompose H with a deterministic gauge.

    Inside exactly degenerate subspaces the basis is rebuilt by projecting product
    states in order of decreasing |m_S| (lower index first on ties).
    """
    check_hermitian(H)
    H = 0.5 * (H + H.conj().T)
    e, U = np.linalg.eigh(H)
    N = len(e)
    spread = max(e[-1] - e[0], 1.0)
    m_abs = np.abs(np.arange(N) - (N - 1) / 2)
    order = sorted(range(N), key=lambda i: (-m_abs[i], i))
    V = np.array(U, dtype=complex)
    for blk in _degenerate_blocks(e, degeneracy_tol * spread):
        if len(blk) == 1:
            V[:, blk[0]] = _fix_phase(V[:, blk[0]])
            continue
        P = U[:, blk]
        chosen = []
        for i in order:
            x = P @ P[i].conj()  # projection of |i> onto the subspace
            for c in chosen:
                x = x - c * (c.conj() @ x)
            nrm = np.linalg.norm(x)
            if nrm > 1e-6:
                chosen.append(_fix_phase(x / nrm))
            if len(chosen) == len(blk):
                break
        V[:, blk] = np.array(chosen).T
    return EigenSystem(energies=e, vectors=V, hamiltonian=np.array(H))


@dataclass(frozen=True)
class DoubletStructure:
    pairs: tuple
    singles: tuple
    energies: np.ndarray
    threshold: float

    @property
    def dim(self) -> int:
        return len(self.energies)

    def groups(self):
        """Doublets and singlets in ascending energy order."""
        out = [tuple(p) for p in self.pairs] + [(s,) for s in self.singles]
        return sorted(out, key=lambda g: min(g))

    def partner(self) -> dict:
        d = {}
        for a, b in self.pairs:
            d[a], d[b] = b, a
        return d

    def gaps(self) -> np.ndarray:
        """Mean-energy differences omega_mn between groups (rows minus columns)."""
        c = np.array([np.mean(self.energies[list(g)]) for g in self.groups()])
        return c[:, None] - c[None, :]


def pair_doublets(es: EigenSystem, threshold: float = 0.5) -> DoubletStructure:
    """Greedy pairing of adjacent near-degenerate levels.

    Levels i and i+1 pair when their splitting is below ``threshold`` times the
    smaller of the neighbouring gaps (i-1 to i, i+1 to i+2).
    """
    e = np.asarray(es.energies)
    N = len(e)
    d = np.diff(e)
    spread = max(e[-1] - e[0], 1.0)
    floor = DEGENERACY_TOL * spread

    def outer(i):
        left = d[i - 1] if i >= 1 else np.inf
        right = d[i + 1] if i + 1 < len(d) else np.inf
        return min(left, right)

    close = [d[i] <= floor or d[i] < threshold * outer(i) for i in range(N - 1)]
    for i in range(len(close) - 1):
        if close[i] and close[i + 1]:
            raise ValueError(
                f"ambiguous pairing: levels {i}, {i + 1}, {i + 2} are mutually near-degenerate "
                f"(splittings {d[i]:.3e}, {d[i + 1]:.3e})"
            )
    pairs, singles, i = [], [], 0
    while i < N:
        if i < N - 1 and close[i]:
            pairs.append((i, i + 1))
            i += 2
        else:
            singles.append(i)
            i += 1
    return DoubletStructure(tuple(pairs), tuple(singles), e.copy(), threshold)


@dataclass(frozen=True)
class LocalizedBasis:
    vectors: np.ndarray
    structure: DoubletStructure

    def hamiltonian(self, H) -> np.ndarray:
        return self.vectors.conj().T @ H @ self.vectors


def build_localized_basis(zero_field: EigenSystem, ds: DoubletStructure, Sz=None) -> LocalizedBasis:
    """Localized states |m> = (|+> - |->)/sqrt2, |m'> = (|+> + |->)/sqrt2 per doublet.

    |+> is the upper state of each zero-field doublet. The phase of |-> makes
    <+|Sz|-> real and non-positive so that |m> sits in the +Sz well and
    <m|H|m'> = (e+ - e-)/2 >= 0. Exactly degenerate doublets are resolved by
    diagonalizing Sz inside the doublet.
    """
    N = zero_field.dim
    if Sz is None:
        Sz = spin_operators((N - 1) / 2)["Sz"]
    U = zero_field.vectors
    e = zero_field.energies
    spread = max(e[-1] - e[0], 1.0)
    L = np.zeros((N, N), dtype=complex)
    for lo, hi in ds.pairs:
        vm, vp = U[:, lo].copy(), U[:, hi].copy()
        if e[hi] - e[lo] <= DEGENERACY_TOL * spread:
            P = U[:, [lo, hi]]
            w, c = np.linalg.eigh(P.conj().T @ Sz @ P)
            a, b = _fix_phase(P @ c[:, 1]), _fix_phase(P @ c[:, 0])
            L[:, lo], L[:, hi] = a, b
            continue
        x = vp.conj() @ Sz @ vm
        if abs(x) > 1e-14:
            vm = vm * np.exp(1j * (np.pi - np.angle(x)))
        L[:, lo] = (vp - vm) / np.sqrt(2)
        L[:, hi] = (vp + vm) / np.sqrt(2)
    for s in ds.singles:
        L[:, s] = U[:, s]
    return LocalizedBasis(L, ds)


def adapt_localized_basis(lb: LocalizedBasis, es: EigenSystem) -> LocalizedBasis:
    """Carry a zero-field localized basis over to the doublet subspaces of ``es``.

    Each localized pair is projected onto the matching eigen-doublet of the
    current Hamiltonian and symmetrically (Loewdin) orthonormalized, so H stays
    block diagonal over doublets. The phase of |m'> keeps <m|H|m'> real and >= 0.
    """
    L, U = lb.vectors, es.vectors
    H = es.hamiltonian
    A = np.zeros_like(L)
    for grp in lb.structure.groups():
        grp = list(grp)
        P = U[:, grp]
        X = P @ (P.conj().T @ L[:, grp])
        w, v = np.linalg.eigh(X.conj().T @ X)
        if w.min() < 1e-8:
            raise ValueError(f"localized states of group {grp} lose support in the field doublet")
        A[:, grp] = X @ (v @ np.diag(w ** -0.5) @ v.conj().T)
        if len(grp) == 2:
            h = A[:, grp[0]].conj() @ H @ A[:, grp[1]]
            if abs(h) > 0:
                A[:, grp[1]] *= np.exp(-1j * np.angle(h))
    return LocalizedBasis(A, lb.structure)


@dataclass(frozen=True)
class DoubletParameters:
    pairs: tuple
    W: np.ndarray
    Delta: np.ndarray
    phase: np.ndarray = field(default=None)


def extract_doublet_params(H, lb: LocalizedBasis) -> DoubletParameters:
    """Bias W = <m|H|m> - <m'|H|m'> and splitting Delta = 2|<m|H|m'>| per doublet."""
    HL = lb.hamiltonian(H)
    pairs = lb.structure.pairs
    W = np.array([(HL[m, m] - HL[mp, mp]).real for m, mp in pairs])
    off = np.array([HL[m, mp] for m, mp in pairs])
    return DoubletParameters(tuple(pairs), W, 2 * np.abs(off), np.angle(off))


def scale_doublet(H, lb: LocalizedBasis, pair: int, delta_scale: float = 1.0, bias=None) -> np.ndarray:
    """Return a lab-frame Hamiltonian with one doublet's splitting scaled and/or bias set.

    Only the 2x2 localized block of ``pair`` is touched; ``bias`` replaces W while
    keeping the block's mean energy.
    """
    L = lb.vectors
    HL = L.conj().T @ H @ L
    m, mp = lb.structure.pairs[pair]
    HL[m, mp] *= delta_scale
    HL[mp, m] *= delta_scale
    if bias is not None:
        mean = 0.5 * (HL[m, m] + HL[mp, mp]).real
        HL[m, m], HL[mp, mp] = mean + bias / 2, mean - bias / 2
    return L @ HL @ L.conj().T
