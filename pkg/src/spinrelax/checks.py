"""Property suite run by the ``check`` verb: tensor laws, detailed balance, reduction identities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from . import reduction as red
from .model import Point
from .tensor import population_rates, transform_tensor, verify_tensor_properties

TENSOR_TOL = 1e-12
BALANCE_TOL = 1e-10
RATE_FLOOR = 1e-14
SUM_RULE_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)


def random_unitary(N: int, seed: int) -> np.ndarray:
    return unitary_group.rvs(N, random_state=np.random.default_rng(seed))


def detailed_balance_violation(R, energies, temperature, floor: float = RATE_FLOOR) -> float:
    """max relative deviation of Gamma_mn / Gamma_nm from exp(-(e_m - e_n)/T)."""
    G = population_rates(R).real
    e = np.asarray(energies)
    worst = 0.0
    for m in range(len(e)):
        for n in range(m + 1, len(e)):
            if G[m, n] > floor and G[n, m] > floor:
                want = np.exp(-(e[m] - e[n]) / temperature)
                worst = max(worst, abs(G[m, n] / G[n, m] / want - 1))
    return worst


def conjugate_pair_violation(coeffs: red.ReductionCoefficients) -> float:
    """max |C_m'm + conj(C_mm')| relative to max |C|."""
    C = coeffs.C
    scale = max(np.abs(C).max(), 1e-300) if C.size else 1.0
    worst = 0.0
    for (m, mp), c in zip(coeffs.coherences, C):
        worst = max(worst, abs(coeffs.C_of(mp, m) + np.conj(c)) / scale)
    return worst


def point_checks(P: Point, seed: int = 0) -> list:
    out = []
    for basis in ("eigen", "localized"):
        R, _ = P.tensor(basis)
        rep = verify_tensor_properties(R)
        out.append(CheckResult(f"conjugation[{basis}]", rep.conjugation, TENSOR_TOL))
        out.append(CheckResult(f"trace[{basis}]", rep.trace, TENSOR_TOL))
    U = random_unitary(P.dim, seed)
    rep = verify_tensor_properties(transform_tensor(P.R_eigen, U, "random"))
    out.append(CheckResult("conjugation[random]", rep.conjugation, TENSOR_TOL))
    out.append(CheckResult("trace[random]", rep.trace, TENSOR_TOL))
    out.append(CheckResult("detailed_balance",
                           detailed_balance_violation(P.R_eigen, P.eigen.energies, P.temperature),
                           BALANCE_TOL))
    for basis in ("eigen", "localized"):
        R, H = P.tensor(basis)
        co = red.compute_coefficients(R, H, P.pairs, 0.0)
        out.append(CheckResult(f"C_conjugate_pairs[{basis}]", conjugate_pair_violation(co), 1e-12))
        z = red.zeroth_order_rates(co, R, H)
        M = z.matrix()
        viol = np.abs(M.sum(axis=0)).max() / max(np.abs(M).max(), 1e-300)
        out.append(CheckResult(f"sum_rule[{basis}]", viol, SUM_RULE_TOL))
    co = red.compute_coefficients(P.R_eigen, P.H_eigen, P.pairs, 0.0)
    out.append(CheckResult("eigen_C_zero", float(np.abs(co.C).max()) if co.C.size else 0.0, 1e-14))
    return out
