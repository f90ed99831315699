"""Unit constants. Internally hbar = k_B = 1 and energies share one unit (cm^-1 by default)."""

from scipy import constants as _c

# Bohr magneton and Boltzmann constant as wavenumbers
MU_B_CM_PER_T = _c.physical_constants["Bohr magneton in inverse meter per tesla"][0] / 100.0
K_B_CM_PER_K = _c.physical_constants["Boltzmann constant in inverse meter per kelvin"][0] / 100.0
# angular frequency per cm^-1: rates in cm^-1 times this give 1/s
RAD_PER_S_PER_CM = 2 * _c.pi * _c.c * 100.0


def kelvin_to_energy(T: float) -> float:
    return T * K_B_CM_PER_K


def rate_to_per_second(rate: float) -> float:
    return rate * RAD_PER_S_PER_CM
