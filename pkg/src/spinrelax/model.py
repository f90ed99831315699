"""Assemble a full (spin, bath, temperature) point in both working bases.

This glues the pieces together the way every comparison in the package needs
them: eigen tensor, field-adapted localized basis, generators, and the rates
from each method.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nonsecular as ns
from . import reduction as red
from .bath import Bath, SpectralDensity, quadrupolar_couplings
from .spin import (
    DoubletStructure,
    EigenSystem,
    LocalizedBasis,
    SpinParameters,
    adapt_localized_basis,
    build_hamiltonian,
    build_localized_basis,
    diagonalize,
    pair_doublets,
    spin_operators,
)
from .tensor import RedfieldTensor, build_generator, build_redfield_eigenbasis, transform_tensor

METHODS = ("nonsecular", "semisecular", "reduced", "reduced_eigen", "secular_localized", "secular_eigen")


def toy_parameters(Bz: float = 0.0) -> SpinParameters:
    """S=2 giant spin with D=-1, E=0.05 (cm^-1) in a longitudinal field Bz (tesla)."""
    return SpinParameters(S=2, D=-1.0, E=0.05, B=(0.0, 0.0, Bz))


def toy_bath(alpha: float = 1e-3, cutoff: float = 10.0) -> Bath:
    ops = spin_operators(2)
    return Bath(quadrupolar_couplings(ops), SpectralDensity("debye_cubic", alpha, cutoff))


@dataclass
class Point:
    """Everything needed to compare methods at one (H, bath, T)."""

    H: np.ndarray
    temperature: float
    eigen: EigenSystem
    structure: DoubletStructure
    localized: LocalizedBasis
    R_eigen: RedfieldTensor
    R_loc: RedfieldTensor
    H_eigen: np.ndarray
    H_loc: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def pairs(self):
        return self.structure.pairs

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def generator(self, basis: str = "eigen") -> np.ndarray:
        key = "G_" + basis
        if key not in self.cache:
            R, H = self.tensor(basis)
            self.cache[key] = build_generator(R, H)
        return self.cache[key]

    def tensor(self, basis: str):
        if basis == "eigen":
            return self.R_eigen, self.H_eigen
        if basis == "localized":
            return self.R_loc, self.H_loc
        raise ValueError(f"unknown basis {basis!r}")

    def sector(self) -> np.ndarray:
        return ns.doublet_sector(self.dim, self.pairs)

    @property
    def eigen_to_localized(self) -> np.ndarray:
        return self.eigen.vectors.conj().T @ self.localized.vectors

    def _bases(self, basis):
        U = self.eigen_to_localized
        return (U,) if basis == "eigen" else (U.conj().T,)

    def exact(self, overlap_threshold: float = 0.5) -> ns.SlowMode:
        """Slowest mode that is population-dominated in the eigen or the localized basis."""
        if "spectrum" not in self.cache:
            self.cache["spectrum"] = ns.spectrum(self.generator("eigen"))
        return ns.slow_rate(self.cache["spectrum"], overlap_threshold, bases=self._bases("eigen"))

    def semisecular(self, basis: str = "localized", overlap_threshold: float = 0.5) -> ns.SlowMode:
        return ns.semisecular_rate(self.generator(basis), self.pairs, overlap_threshold,
                                   bases=self._bases(basis))

    def secular(self, basis: str) -> ns.SlowMode:
        return ns.secular_rate(self.generator(basis))

    def reduced(self, basis: str = "localized", **kw) -> red.SelfConsistentSolution:
        R, H = self.tensor(basis)
        return red.solve_self_consistent(R, H, self.pairs, **kw)


def reference_localized(params: SpinParameters, threshold: float = 0.5) -> LocalizedBasis:
    """Localized basis from the zero-field eigenstates of ``params``."""
    es0 = diagonalize(build_hamiltonian(params.with_field((0.0, 0.0, 0.0))))
    ds0 = pair_doublets(es0, threshold)
    return build_localized_basis(es0, ds0, spin_operators(params.S)["Sz"])


def build_point(H, bath: Bath, temperature: float, reference: LocalizedBasis,
                threshold: float = 0.5) -> Point:
    """Eigen tensor at H plus its image in the field-adapted localized basis.

    The doublet grouping must match the reference grouping; a level crossing
    that reshuffles doublets is reported instead of silently re-paired.
    """
    es = diagonalize(H)
    ds = pair_doublets(es, threshold)
    if ds.pairs != reference.structure.pairs or ds.singles != reference.structure.singles:
        raise ns.SolverError(
            f"doublet grouping at this field {ds.pairs} differs from zero field {reference.structure.pairs}"
        )
    lb = adapt_localized_basis(reference, es)
    R_e = build_redfield_eigenbasis(es.energies, es.vectors, bath, temperature)
    U = es.vectors.conj().T @ lb.vectors
    R_l = transform_tensor(R_e, U, "localized")
    H_e = np.diag(es.energies).astype(complex)
    H_l = U.conj().T @ H_e @ U
    return Point(np.asarray(H), temperature, es, ds, lb, R_e, R_l, H_e, H_l)


def toy_point(Bz: float, temperature: float, bath: Bath | None = None) -> Point:
    p = toy_parameters(Bz)
    return build_point(build_hamiltonian(p), bath or toy_bath(), temperature, reference_localized(p))
