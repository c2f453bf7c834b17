"""Pointwise comparison of a synthetic experiment with both theories, and the
electric-to-Casimir pressure ratio for the three surface states."""
# %% Theory curves on the plotting grid
import numpy as np

from casimir_metrology import builtin_gold_table
from casimir_metrology.analysis import (
    compare_with_theory,
    electric_to_casimir_ratio,
    figure_grid,
    synthesize_experiment,
)
from casimir_metrology.lifshitz import LifshitzSettings, PressureCurve, PressureInterpolant
from casimir_metrology.optics import DRUDE, PLASMA, PermittivityModel
from casimir_metrology.simulate import CLEANED, CLEANED_TWICE, UNCLEANED

table = builtin_gold_table()
settings = LifshitzSettings()
interp = {
    v: PressureInterpolant.from_model(PermittivityModel(v, table), settings, 225e-9, 710e-9, 31)
    for v in (DRUDE, PLASMA)
}
a = figure_grid()
drude = PressureCurve(a, interp[DRUDE](a), label="drude")
plasma = PressureCurve(a, interp[PLASMA](a), label="plasma")

# %% Synthetic experiment drawn around the plasma curve
for seed in range(3):
    exp = synthesize_experiment(interp[PLASMA], a, seed=seed)
    rep = compare_with_theory(exp, drude, plasma)
    lo, hi = rep.drude_band
    print(f"seed {seed}: Drude excluded {lo * 1e9:.0f}-{hi * 1e9:.0f} nm, plasma consistent at "
          f"{100 * rep.plasma_consistent_fraction:.0f}% of points")
print(f"relative error at 235 nm: {100 * exp.sigmas[0] / exp.pressures[0]:.2f}%")

# %% Electric pressure of the uncompensated residual potential
sep = np.array([235, 300, 400, 700]) * 1e-9
for law in (UNCLEANED, CLEANED, CLEANED_TWICE):
    t = electric_to_casimir_ratio(sep, law, casimir=interp[PLASMA])
    print(f"{law.name:>14}: " + "  ".join(f"{p:7.2f}%" for p in t.percent))
