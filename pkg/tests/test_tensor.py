import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from spinrelax.bath import Bath, CouplingOperator, SpectralDensity, bath_spectrum, quadrupolar_couplings
from spinrelax.model import toy_bath, toy_parameters
from spinrelax.spin import SpinParameters, build_hamiltonian, diagonalize, spin_operators
from spinrelax.tensor import (
    RedfieldTensor,
    build_generator,
    build_redfield_eigenbasis,
    dephasing,
    dump_tensor,
    load_tensor,
    population_rates,
    transform_tensor,
    verify_tensor_properties,
)
from spinrelax.units import MU_B_CM_PER_T


def two_level(T=0.7, B=1.0):
    p = SpinParameters(S=0.5, B=(0, 0, B))
    es = diagonalize(build_hamiltonian(p))
    bath = Bath([CouplingOperator(spin_operators(0.5)["Sx"])], SpectralDensity("debye_cubic", 0.01, 10.0))
    return es, bath, build_redfield_eigenbasis(es.energies, es.vectors, bath, T)


def loop_tensor(e, A, S):
    """Element-by-element golden-rule assembly, one coupling channel."""
    N = len(e)
    R = np.zeros((N,) * 4, dtype=complex)
    for a in range(N):
        for b in range(N):
            for c in range(N):
                for d in range(N):
                    x = 0.5 * A[a, c] * A[d, b] * (S(e[d] - e[b]) + S(e[c] - e[a]))
                    if b == d:
                        x -= 0.5 * sum(A[a, g] * A[g, c] * S(e[c] - e[g]) for g in range(N))
                    if a == c:
                        x -= 0.5 * sum(A[d, g] * A[g, b] * S(e[d] - e[g]) for g in range(N))
                    R[a, b, c, d] = x
    return R.reshape(N * N, N * N)


def random_system(rng, S=None):
    S = S if S is not None else rng.choice([1.0, 1.5, 2.0])
    D = rng.uniform(-2, -0.2)
    E = rng.uniform(0, abs(D) / 3)
    B = rng.uniform(-0.5, 0.5, 3)
    p = SpinParameters(S=S, D=D, E=E, B=tuple(B))
    es = diagonalize(build_hamiltonian(p))
    bath = Bath(quadrupolar_couplings(spin_operators(S)), SpectralDensity("debye_cubic", 1e-3, 10.0))
    return es, build_redfield_eigenbasis(es.energies, es.vectors, bath, rng.uniform(0.2, 3))


def test_zero_coupling():
    es = diagonalize(build_hamiltonian(toy_parameters(0.01)))
    R = build_redfield_eigenbasis(es.energies, es.vectors, toy_bath(alpha=0.0), 1.0)
    assert np.abs(R.matrix).max() == 0


def test_two_level_golden_rule():
    T = 0.7
    es, bath, R = two_level(T)
    w = es.energies[1] - es.energies[0]
    assert abs(w - 2 * MU_B_CM_PER_T) < 1e-14
    G = population_rates(R).real
    down, up = G[0, 1], G[1, 0]
    assert down == pytest.approx(0.25 * bath_spectrum(bath.density, w, T), rel=1e-14)
    assert up / down == pytest.approx(math.exp(-w / T), rel=1e-12)
    g = dephasing(R)
    assert g[0, 1].real == pytest.approx((up + down) / 2, rel=1e-12)


def test_matches_loop_oracle():
    rng = np.random.default_rng(3)
    es, _ = random_system(rng, 1.5)
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    A = A + A.conj().T
    J = SpectralDensity("debye_cubic", 0.02, 5.0)
    bath = Bath([CouplingOperator(A)], J)
    e, U = es.energies, es.vectors
    R = build_redfield_eigenbasis(e, U, bath, 0.9)
    Ae = U.conj().T @ A @ U
    want = loop_tensor(e, Ae, lambda w: float(bath_spectrum(J, w, 0.9)))
    assert np.abs(R.matrix - want).max() < 1e-14 * np.abs(want).max()


def test_strength_scaling():
    es = diagonalize(build_hamiltonian(toy_parameters(0.01)))
    ops = spin_operators(2)
    J = SpectralDensity()
    R1 = build_redfield_eigenbasis(es.energies, es.vectors, Bath(quadrupolar_couplings(ops, 1.0), J), 1.0)
    R2 = build_redfield_eigenbasis(es.energies, es.vectors, Bath(quadrupolar_couplings(ops, 2.0), J), 1.0)
    assert np.allclose(R2.matrix, 4 * R1.matrix, rtol=1e-14, atol=0)


@pytest.mark.parametrize("seed", range(5))
def test_eigenbasis_population_rates(seed):
    rng = np.random.default_rng(seed)
    es, R = random_system(rng)
    G = population_rates(R)
    assert np.abs(G.imag).max() < 1e-14 * np.abs(G).max()
    G = G.real
    N = len(G)
    off = ~np.eye(N, dtype=bool)
    assert G[off].min() >= -1e-12
    assert np.allclose(np.diag(G), -(G.sum(axis=0) - np.diag(G)), atol=1e-12 * np.abs(G).max())


def test_transform_identity_and_roundtrip():
    rng = np.random.default_rng(0)
    es, R = random_system(rng, 2.0)
    same = transform_tensor(R, np.eye(5))
    assert np.array_equal(same.matrix, R.matrix)
    U = unitary_group.rvs(5, random_state=rng)
    back = transform_tensor(transform_tensor(R, U), U.conj().T)
    assert np.abs(back.matrix - R.matrix).max() < 1e-12 * np.abs(R.matrix).max()


def test_non_unitary_rejected():
    es, R = random_system(np.random.default_rng(1), 1.0)
    with pytest.raises(ValueError, match="unitary"):
        transform_tensor(R, 1.1 * np.eye(3))


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_properties_in_any_basis(seed):
    rng = np.random.default_rng(seed)
    es, R = random_system(rng)
    assert verify_tensor_properties(R).passed
    U = unitary_group.rvs(R.dim, random_state=rng)
    assert verify_tensor_properties(transform_tensor(R, U)).passed


def test_perturbation_reported():
    es, R = random_system(np.random.default_rng(2), 1.0)
    M = R.matrix.copy()
    M[1, 5] += 1e-6
    rep = verify_tensor_properties(M, relative=False)
    assert rep.conjugation == pytest.approx(1e-6, rel=1e-6)
    assert not rep.passed


def test_coherent_generator_spectrum():
    es = diagonalize(build_hamiltonian(toy_parameters(0.01)))
    N = 5
    G = build_generator(RedfieldTensor(np.zeros((N * N, N * N), complex)), np.diag(es.energies))
    e = es.energies
    want = np.array([1j * (e[l] - e[k]) for k in range(N) for l in range(N)])
    assert np.abs(np.diag(G) - want).max() == 0
    assert np.count_nonzero(G - np.diag(np.diag(G))) == 0


def test_generator_eigenbasis_diagonal():
    es, R = random_system(np.random.default_rng(4), 2.0)
    G = build_generator(R, np.diag(es.energies))
    N = R.dim
    e = es.energies
    for m in range(N):
        for n in range(N):
            q = m * N + n
            assert G[q, q] == R.matrix[q, q] + 1j * (e[n] - e[m])


def test_generator_trace_and_conjugation():
    rng = np.random.default_rng(5)
    es, R = random_system(rng, 1.5)
    H = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    H = H + H.conj().T
    G = build_generator(R, H)
    rep = verify_tensor_properties(G)
    assert rep.passed


def test_dimension_mismatch():
    es, R = random_system(np.random.default_rng(6), 1.0)
    with pytest.raises(ValueError):
        build_generator(R, np.eye(4))


def test_dump_roundtrip(tmp_path):
    es, R = random_system(np.random.default_rng(7), 1.5)
    path = tmp_path / "R.txt"
    dump_tensor(R, path)
    back = load_tensor(path)
    assert np.array_equal(back.matrix, R.matrix)
    first = path.read_text().split("\n")[0].split()
    assert len(first) == 2 * R.matrix.shape[1]
