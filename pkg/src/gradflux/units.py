"""Unit conventions and physical constants.

Library-wide conventions: inductances in nH, capacitances in fF, energies as
frequencies E/h in GHz, magnetic flux in units of the flux quantum Phi_0, and
magnetic field in tesla. Time-domain quantities use seconds unless a function
says otherwise.
"""

import numpy as np
import scipy.constants as sc

#: Superconducting flux quantum h/(2e) in Wb.
PHI0 = sc.h / (2.0 * sc.e)

#: Charging-energy coefficient: E_C [GHz] = EC_GHZ_FF / C [fF], E_C = e^2/2C.
EC_GHZ_FF = sc.e**2 / (2.0 * sc.h) * 1e6

#: Inductive-energy coefficient: E_L [GHz] = EL_GHZ_NH / L [nH],
#: E_L = (Phi_0/2pi)^2 / L.
EL_GHZ_NH = (PHI0 / (2.0 * np.pi)) ** 2 / sc.h


def charging_energy(c_ff: float) -> float:
    """E_C/h in GHz for a capacitance in fF."""
    return EC_GHZ_FF / c_ff


def inductive_energy(l_nh: float) -> float:
    """E_L/h in GHz for an inductance in nH."""
    return EL_GHZ_NH / l_nh


def mode_frequency(l_nh: float, c_ff: float) -> float:
    """Harmonic mode frequency 1/(2 pi sqrt(LC)) in GHz."""
    return np.sqrt(8.0 * charging_energy(c_ff) * inductive_energy(l_nh))


def phase_zpf(l_nh: float, c_ff: float) -> float:
    """Zero-point spread of the superconducting phase, (2 E_C / E_L)^(1/4)."""
    return (2.0 * charging_energy(c_ff) / inductive_energy(l_nh)) ** 0.25
