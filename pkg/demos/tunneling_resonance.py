"""Tunneling rate of the excited doublet as its bias W is swept through resonance.

In the incoherent regime the zeroth-order tunneling rate follows the
Lorentzian Delta^2 gamma / (2 (gamma^2 + W^2)) in the bias W. The scan
prints both next to each other.

    python demos/tunneling_resonance.py
"""

import numpy as np

from spinrelax.model import build_point, reference_localized, toy_bath, toy_parameters
from spinrelax.spin import build_hamiltonian
from spinrelax.sweep import tunneling_scan

p = toy_parameters(0.01)
H, ref, bath = build_hamiltonian(p), reference_localized(p), toy_bath(1e-5)
T = 0.2

base = build_point(H, bath, T, ref)
m, mp = base.pairs[1]
gamma = -base.R_loc.as4()[m, mp, m, mp].real
print(f"pair {base.pairs[1]}, dephasing gamma' = {gamma:.4e} cm^-1")

rows = tunneling_scan(H, bath, T, ref, 1, np.linspace(-10 * gamma, 10 * gamma, 21))
print(f"{'W/gamma':>8} {'tunnel':>11} {'lorentzian':>11} {'lambda':>11}")
for r in rows:
    if r.error:
        print(f"{r.W / gamma:8.2f} {r.error}")
        continue
    print(f"{r.W / gamma:8.2f} {r.gamma_tunnel:11.4e} {r.gamma_incoherent:11.4e} {r.lam:11.4e}")
