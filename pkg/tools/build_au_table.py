"""Regenerate the shipped Au optical table.

The table is computed from the Lorentz-Drude parametrisation of Au published
by A. D. Rakic, A. B. Djurisic, J. M. Elazar and M. L. Majewski, Appl. Opt.
37, 5271 (1998), Table 3. It stands in for a measured n,k tabulation; the
parametrisation reproduces the measured data it was fitted to within a few
per cent between 0.1 and 5 eV and is an extrapolation outside that window.
"""
from pathlib import Path

import numpy as np

from casimir_metrology.optics import OpticalTable, write_optical_table

OMEGA_P = 9.03
F0, GAMMA0 = 0.760, 0.053
OSCILLATORS = [  # (strength, damping eV, resonance eV)
    (0.024, 0.241, 0.415),
    (0.010, 0.345, 0.830),
    (0.071, 0.870, 2.969),
    (0.601, 2.494, 4.304),
    (4.384, 2.214, 13.32),
]


def rakic_au_eps(energy_ev):
    w = np.asarray(energy_ev, dtype=float)
    eps = 1.0 - F0 * OMEGA_P**2 / (w * (w + 1j * GAMMA0))
    for f, g, w0 in OSCILLATORS:
        eps = eps + f * OMEGA_P**2 / (w0**2 - w**2 - 1j * w * g)
    return eps


def build(rows=160, e_min=0.1, e_max=150.0):
    e = np.round(np.geomspace(e_min, e_max, rows), 6)
    nk = np.sqrt(rakic_au_eps(e))
    n = np.round(nk.real, 8)
    k = np.round(nk.imag, 8)
    return OpticalTable(e, n, k, material="Au", source="Rakic et al. Appl. Opt. 37 5271 (1998) Lorentz-Drude model")


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "casimir_metrology" / "data" / "au_optical.csv"
    table = build()
    write_optical_table(
        table,
        out,
        comments=[
            "Complex refractive index of gold, n + i k, versus photon energy.",
            "Generated by tools/build_au_table.py from the Lorentz-Drude parametrisation",
            "of Rakic, Djurisic, Elazar and Majewski, Appl. Opt. 37, 5271 (1998), Table 3:",
            "omega_p 9.03 eV, f0 0.760, Gamma0 0.053 eV, plus five Lorentz oscillators.",
            "Fitted to measured data between 0.1 and 5 eV; values above 5 eV are model extrapolation.",
            "160 log-spaced rows from 0.1 to 150 eV; n and k rounded to 8 decimals.",
        ],
    )
    print(f"wrote {len(table)} rows to {out}")
