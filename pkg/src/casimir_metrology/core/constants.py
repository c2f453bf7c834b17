"""Physical constants (CODATA values as shipped with scipy) and unit helpers.

All internal computations use SI units. Conversions to the units used in
reports (nm, mV, eV) happen only at I/O boundaries.
"""
from dataclasses import dataclass

from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float
    c: float
    k_B: float
    eps0: float
    eV_to_rad_per_s: float


CONSTANTS = PhysicalConstants(
    hbar=_sc.hbar,
    c=_sc.c,
    k_B=_sc.k,
    eps0=_sc.epsilon_0,
    eV_to_rad_per_s=_sc.electron_volt / _sc.hbar,
)

HBAR = CONSTANTS.hbar
C_LIGHT = CONSTANTS.c
K_B = CONSTANTS.k_B
EPS0 = CONSTANTS.eps0
EV = CONSTANTS.eV_to_rad_per_s

NM = 1e-9
UM = 1e-6
MV = 1e-3


def ev_to_rad_s(energy_ev):
    """Photon energy in eV to angular frequency in rad/s."""
    return energy_ev * EV


def rad_s_to_ev(omega):
    return omega / EV
