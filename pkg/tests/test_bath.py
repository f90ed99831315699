import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinrelax.bath import (
    Bath,
    CouplingOperator,
    SpectralDensity,
    bath_spectrum,
    bose_occupation,
    quadrupolar_couplings,
)
from spinrelax.spin import spin_operators


def test_occupation_zero_temperature():
    assert bose_occupation(0.7, 0.0) == 0


def test_occupation_ln2():
    assert abs(bose_occupation(math.log(2), 1.0) - 1.0) < 1e-15


def test_occupation_high_t():
    T = 3.0
    w = 0.01 * T
    assert abs(bose_occupation(w, T) / (T / w - 0.5) - 1) < 1e-3


@pytest.mark.parametrize("w", [0.0, -1.0])
def test_occupation_rejects_nonpositive(w):
    with pytest.raises(ValueError):
        bose_occupation(w, 1.0)


def test_debye_small_frequency_limit():
    J = SpectralDensity("debye_cubic", 1.0, 10.0)
    s = [bath_spectrum(J, w, 1.0) for w in (1e-2, 1e-3, 1e-4)]
    # S ~ w^2 as w -> 0+
    assert s[1] / s[0] == pytest.approx(1e-2, rel=1e-2)
    assert s[2] / s[1] == pytest.approx(1e-2, rel=1e-3)
    assert bath_spectrum(J, 0.0, 1.0) == 0.0


def test_detailed_balance_at_kT():
    J = SpectralDensity("debye_cubic", 1.0, 10.0)
    T = 0.8
    r = bath_spectrum(J, -T, T) / bath_spectrum(J, T, T)
    assert abs(r - math.exp(-1)) < 1e-12 * math.exp(-1)


def test_debye_value():
    J = SpectralDensity("debye_cubic", 1.0, 10.0)
    want = 1.0 * math.exp(-0.1) * (1 / (math.e - 1) + 1)
    assert abs(bath_spectrum(J, 1.0, 1.0) - want) < 1e-14


@given(st.sampled_from(["debye_cubic", "ohmic"]), st.floats(0.05, 20), st.floats(-4, 1.3))
@settings(max_examples=60, deadline=None)
def test_detailed_balance_property(form, T, logw):
    J = SpectralDensity(form, 0.3, 10.0)
    w = 10**logw
    sp, sm = bath_spectrum(J, w, T), bath_spectrum(J, -w, T)
    assert sp >= 0 and sm >= 0
    assert abs(sm - math.exp(-w / T) * sp) <= 1e-12 * sp


def test_monotone_in_temperature():
    J = SpectralDensity("debye_cubic", 1.0, 10.0)
    w = np.geomspace(1e-3, 30, 40)
    prev = bath_spectrum(J, w, 0.1)
    for T in (0.3, 1.0, 3.0, 10.0):
        cur = bath_spectrum(J, w, T)
        assert np.all(cur >= prev)
        prev = cur


def test_forms_vanish_at_zero():
    for form in ("debye_cubic", "ohmic"):
        assert SpectralDensity(form, 1.0, 5.0)(0.0) == 0


def test_ohmic_zero_limit():
    J = SpectralDensity("ohmic", 0.2, 5.0)
    assert bath_spectrum(J, 0.0, 1.5) == pytest.approx(0.3)
    assert bath_spectrum(J, 1e-7, 1.5) == pytest.approx(0.3, rel=1e-6)


def test_tabulated(tmp_path):
    path = tmp_path / "j.txt"
    path.write_text("0 0\n1 2\n3 2\n")
    J = SpectralDensity.from_file(path)
    assert J(0.5) == pytest.approx(1.0)
    assert J(5.0) == 0.0
    assert bath_spectrum(J, 0.0, 2.0) == pytest.approx(4.0)


def test_bad_density_rejected():
    with pytest.raises(ValueError):
        SpectralDensity("lorentz", 1.0, 1.0)
    with pytest.raises(ValueError):
        SpectralDensity("tabulated", table=((1, 0), (0, 1)))


def test_coupling_must_be_hermitian():
    with pytest.raises(ValueError):
        CouplingOperator(np.array([[0, 1], [0, 0]]))


def test_quadrupolar_set():
    ops = spin_operators(2)
    cs = quadrupolar_couplings(ops)
    assert len(cs) == 4
    for c in cs:
        # each operator changes m by one or two units, never zero
        assert np.abs(np.diag(c.matrix)).max() < 1e-14
    b = Bath(cs, SpectralDensity())
    assert b.spectrum(1.0, 1.0) > 0
