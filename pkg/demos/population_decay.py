"""Propagate a spin prepared in one well and watch it relax at the slow rate.

Starting from the upper localized state of the ground doublet, the distance
to equilibrium decays as exp(-lambda t) once the fast modes have died out.

    python demos/population_decay.py
"""

import numpy as np

from spinrelax import nonsecular as ns
from spinrelax.model import toy_point

P = toy_point(0.01, 1.0)
G = P.generator("localized")
sp = ns.spectrum(G)
lam = ns.slow_rate(sp).rate
rho_eq = ns.stationary_state(sp)

m, mp = P.pairs[0]
rho0 = np.zeros((P.dim, P.dim), complex)
rho0[mp, mp] = 1.0

times = np.linspace(0, 6, 13) / lam
traj = ns.propagate(rho0, G, times)
print(f"slow rate lambda = {lam:.5e} cm^-1")
print(f"{'lambda t':>9} {'p_upper':>9} {'distance':>11} {'exp(-lam t)':>11}")
d0 = abs(traj[0][mp, mp] - rho_eq[mp, mp]).real
for t, r in zip(times, traj):
    d = abs(r[mp, mp] - rho_eq[mp, mp]).real
    print(f"{lam * t:9.2f} {r[mp, mp].real:9.5f} {d / d0:11.4e} {np.exp(-lam * t):11.4e}")
