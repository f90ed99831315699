import numpy as np
import pytest

from spinrelax import closed_forms as cf
from spinrelax import reduction as red
from spinrelax.bath import Bath, SpectralDensity, quadrupolar_couplings
from spinrelax.model import build_point, reference_localized, toy_bath
from spinrelax.nonsecular import SolverError
from spinrelax.spin import SpinParameters, build_hamiltonian, extract_doublet_params, scale_doublet, spin_operators

OFF = ~np.eye(5, dtype=bool)


def doublet_params(P):
    return extract_doublet_params(P.H, P.localized)


@pytest.mark.parametrize("Bz,T", [(0.0, 1.0), (0.002, 0.457), (0.01, 2.0)])
def test_localized_forms_match_general(toy, Bz, T):
    P = toy(Bz, T)
    dp = doublet_params(P)
    lam = 1e-4
    co = red.compute_coefficients(P.R_loc, P.H_loc, P.pairs, lam)
    z = red.zeroth_order_rates(co, P.R_loc, P.H_loc)
    for i, (a, b) in enumerate(P.pairs):
        C = cf.localized_C(P.R_loc, a, b, dp.W[i], dp.Delta[i], lam)
        assert abs(C - co.C_of(a, b)) < 1e-12 * max(abs(C), 1e-300)
        for k in range(5):
            D = cf.localized_D(P.R_loc, a, b, k, k, dp.W[i], lam)
            assert abs(D - co.D_of(a, b, k, k)) < 1e-12 * np.abs(co.Dp).max()
        t = cf.localized_tunnel(P.R_loc, a, b, dp.W[i], dp.Delta[i], lam)
        assert t == pytest.approx(z.tunnel[a, b], rel=1e-10)
    lc = cf.localized_correction(P.R_loc, P.pairs, dp.W, dp.Delta, lam)
    assert np.abs(lc - z.corr)[OFF].max() < 1e-10 * np.abs(z.corr).max()


def test_eigen_form_matches_general(toy):
    P = toy(0.002, 1.229)
    co = red.compute_coefficients(P.R_eigen, P.H_eigen, P.pairs, 1e-3)
    z = red.zeroth_order_rates(co, P.R_eigen, P.H_eigen)
    ec = cf.eigenbasis_correction(P.R_eigen, P.eigen.energies, P.pairs, 1e-3)
    assert np.abs(ec - z.corr)[OFF].max() < 1e-12 * np.abs(z.corr).max()


def test_incoherent_examples():
    assert cf.incoherent_rate(1.0, 3.0, 1.0, 0.0) == 0.05
    assert cf.incoherent_rate(0.0, 0.3, 1.0) == 0.0
    assert cf.incoherent_rate(0.2, -0.07, 0.5, 0.07) == pytest.approx(0.2**2 / (2 * 0.5), rel=1e-15)
    W = np.linspace(-1, 1, 201)
    vals = [cf.incoherent_rate(0.2, w, 0.1, 0.3) for w in W]
    assert W[int(np.argmax(vals))] == pytest.approx(-0.3)


@pytest.mark.parametrize("g", [0.0, -1.0])
def test_incoherent_rejects_nonpositive_dephasing(g):
    with pytest.raises(ValueError):
        cf.incoherent_rate(1.0, 0.0, g)


def test_zero_splitting_no_tunneling(toy):
    P = toy(0.01, 1.0)
    H = scale_doublet(P.H, P.localized, 0, 0.0)
    Q = build_point(H, toy_bath(), 1.0, P.localized)
    dp = doublet_params(Q)
    assert abs(dp.Delta[0]) < 1e-12
    assert cf.localized_tunnel(Q.R_loc, 0, 1, dp.W[0], 0.0) == 0


def test_high_T_form_in_its_regime(toy):
    P = toy(0.1, 2.0, 1e-4)
    assert cf.high_T_regime(P.R_loc, P.pairs).ok
    dp = doublet_params(P)
    h = cf.high_T_correction(P.R_loc, P.pairs, dp.W, dp.Delta)
    co = red.compute_coefficients(P.R_loc, P.H_loc, P.pairs, 0.0)
    z = red.zeroth_order_rates(co, P.R_loc, P.H_loc)
    assert np.abs(h - z.corr)[OFF].max() < 0.05 * np.abs(z.corr).max()


def test_high_T_regime_rejected(toy):
    P = toy(0.01, 0.2)
    dp = doublet_params(P)
    with pytest.raises(SolverError) as exc:
        cf.high_T_correction(P.R_loc, P.pairs, dp.W, dp.Delta)
    assert max(exc.value.diagnostics["ratios"].values()) > 0.1


def test_high_T_zero_splitting(toy):
    P = toy(0.1, 2.0, 1e-4)
    h = cf.high_T_correction(P.R_loc, P.pairs, [0.1, 0.2], [0.0, 0.0])
    assert np.abs(h).max() == 0


def test_high_T_suppressed_off_resonance(toy):
    P = toy(0.1, 2.0, 1e-4)
    vals = []
    for W in (0.2, 0.4, 0.8):
        Q = build_point(scale_doublet(P.H, P.localized, 0, 1.0, bias=W), toy_bath(1e-4), 2.0, P.localized)
        dp = doublet_params(Q)
        vals.append(abs(cf.high_T_correction(Q.R_loc, Q.pairs, dp.W, dp.Delta, check=False)[0, 4]))
    assert vals[1] / vals[0] == pytest.approx(0.5, rel=0.05)
    assert vals[2] / vals[1] == pytest.approx(0.5, rel=0.05)


def tilted_point(T=1.0):
    # a tilted field breaks the parity that hides the ground doublet's transfer terms
    p = SpinParameters(S=2, D=-1, E=0.05, B=(0.004, 0.0, 0.01))
    bath = Bath(quadrupolar_couplings(spin_operators(2)), SpectralDensity("debye_cubic", 1e-3, 10.0))
    return build_point(build_hamiltonian(p), bath, T, reference_localized(p))


def test_eigen_ground_term_vanishes_with_large_splitting():
    P = tilted_point()
    e0 = P.eigen.energies
    g, gp = P.pairs[0]
    mags = []
    for f in (1, 10, 100):
        e = e0.copy()
        mid = 0.5 * (e[g] + e[gp])
        e[g], e[gp] = mid + f * (e[g] - mid), mid + f * (e[gp] - mid)
        mags.append(np.abs(cf.eigenbasis_correction(P.R_eigen, e, P.pairs, ground_only=True)).max())
    assert mags[0] > 0
    assert mags[0] > mags[1] > mags[2]
    assert mags[2] < 0.02 * mags[0]


def test_eigen_no_transfer_no_correction(toy):
    P = toy(0.01, 1.0)
    R4 = P.R_eigen.matrix.reshape((5,) * 4).copy()
    for a, b in P.pairs:
        R4[:, :, a, b] = R4[:, :, b, a] = 0
        R4[a, b] = R4[b, a] = 0
    out = cf.eigenbasis_correction(R4.reshape(25, 25), P.eigen.energies, P.pairs)
    assert np.abs(out).max() == 0


def eigen_slow_rate(P, ground_only):
    R4 = P.R_eigen.matrix.reshape((5,) * 4)
    M = np.array([[R4[m, m, k, k].real for k in range(5)] for m in range(5)])
    M = M + cf.eigenbasis_correction(P.R_eigen, P.eigen.energies, P.pairs, ground_only=ground_only)
    M -= np.diag(M.sum(axis=0))
    return red.slowest_rate(M)[0]


def test_eigen_ground_only_form_at_low_temperature(toy):
    # low T, where only the ground doublet is populated and the excited gaps dominate
    P = toy(0.002, 0.2)
    full, ground = eigen_slow_rate(P, False), eigen_slow_rate(P, True)
    assert abs(ground / full - 1) < 0.10
