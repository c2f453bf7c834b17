"""Lifshitz pressure between Au plates: Drude versus plasma extrapolation.

Run with ``python3 notebooks/01_theory_curves.py``; cells are marked ``# %%``.
"""
# %% Optical data and the two permittivity models
import numpy as np

from casimir_metrology import builtin_gold_table
from casimir_metrology.lifshitz import (
    LifshitzSettings,
    casimir_pressure_plates,
    ideal_casimir_pressure,
    pfa_correction_estimate,
    sphere_gradient_from_pressure,
)
from casimir_metrology.optics import DRUDE, PLASMA, PermittivityModel

table = builtin_gold_table()
drude = PermittivityModel(DRUDE, table)
plasma = PermittivityModel(PLASMA, table)
settings = LifshitzSettings(temperature=300.0)

xi = np.geomspace(1e13, 1e17, 5)
print("xi [rad/s]      eps_drude        eps_plasma")
for x, d, p in zip(xi, drude.eps(xi), plasma.eps(xi)):
    print(f"{x:10.3e}  {d:14.6e}  {p:14.6e}")

# %% Pressures at a few separations
a = np.array([235, 300, 400, 550, 700]) * 1e-9
p_drude = casimir_pressure_plates(a, drude, settings)
p_plasma = casimir_pressure_plates(a, plasma, settings)
ideal = ideal_casimir_pressure(a)
print("\na [nm]   P_drude [Pa]   P_plasma [Pa]   gap [%]   P/P_ideal (plasma)")
for row in zip(a, p_drude, p_plasma, ideal):
    ai, d, p, i = row
    print(f"{ai * 1e9:5.0f}   {d:12.6f}   {p:13.6f}   {100 * (p - d) / p:6.2f}   {p / i:8.4f}")

# %% What the sphere-plate experiment sees
R = 60.8e-6
for ai, p in zip(a, p_plasma):
    g = sphere_gradient_from_pressure(p, R)
    print(f"a = {ai * 1e9:3.0f} nm: gradient {g:.4e} N/m, PFA error bound {100 * pfa_correction_estimate(ai, R):.2f}%")
