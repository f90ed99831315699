"""Slowest relaxation rate of the S=2 toy spin from every method, side by side.

The full non-secular generator is the reference. The semi-secular generator
keeps only intra-doublet coherences, the reduced method solves the population
equations self-consistently, and the two plain secular rates drop every
coherence in one basis.

    python demos/compare_methods.py
"""

import numpy as np

from spinrelax import nonsecular as ns
from spinrelax.model import toy_point

temps = np.linspace(0.2, 2.0, 8)
fields = (0.0, 0.002, 0.01)

print(f"{'Bz':>6} {'kT':>6} {'exact':>11} {'semisec':>8} {'red_loc':>8} {'red_eig':>8} {'sec_loc':>8} {'sec_eig':>8}")
for B in fields:
    for T in temps:
        P = toy_point(B, T)
        ex = P.exact().rate
        cols = [P.semisecular().rate]
        for basis in ("localized", "eigen"):
            try:
                cols.append(P.reduced(basis).lam)
            except ns.SolverError:
                cols.append(np.nan)
        cols += [P.secular("localized").rate, P.secular("eigen").rate]
        # ratios to the exact rate; nan marks a reduction with no self-consistent root
        print(f"{B:6.3f} {T:6.3f} {ex:11.4e} " + " ".join(f"{c / ex:8.4f}" for c in cols))
