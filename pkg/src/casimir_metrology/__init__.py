"""Casimir-pressure metrology toolkit.

Sphere-plate electrostatics, Lifshitz pressures from tabulated optical data,
synthetic dynamic-AFM experiments, their calibration and comparison of the
extracted pressures with Drude and plasma theory.
"""
from .analysis import (
    ComparisonReport,
    ErrorBudget,
    compare_with_theory,
    electric_to_casimir_ratio,
    extract_pressure,
    propagate_separation_error,
    total_experimental_error,
)
from .calibrate import CalibrationResult, ParabolaFitPoint, run_calibration, fit_absolute_separation, fit_sweep_parabola, fit_v0_line
from .electrostatics import ElectricDrive, SpherePlateGeometry, beta_geometric, electric_force_gradient, electric_pressure_pfa
from .errors import CasimirError, FitError, NumericalError, QuadratureError, SeriesError, ValidationError
from .lifshitz import LifshitzSettings, PressureCurve, PressureInterpolant, casimir_pressure_plates, pfa_correction_estimate
from .optics import DRUDE, PLASMA, DrudeParameters, OpticalTable, PermittivityModel, eps_imag_axis, load_optical_table
from .simulate import ExperimentConfig, SweepDataset, V0Law, frequency_shift_model, generate_sweeps, subtract_drift, v0_at

__version__ = "0.1.0"


def builtin_gold_table():
    """The bundled Au optical table."""
    from importlib.resources import files

    return load_optical_table(files(__name__) / "data" / "au_optical.csv")
