"""Constants and numerical kernels shared by the physics modules."""
from .constants import CONSTANTS, PhysicalConstants
from .fitting import FitResult, fit_linear_least_squares, fit_nonlinear_least_squares
from .quadrature import integrate_interval, integrate_semi_infinite
from .series import SeriesResult, sum_series

__all__ = [
    "CONSTANTS",
    "PhysicalConstants",
    "FitResult",
    "fit_linear_least_squares",
    "fit_nonlinear_least_squares",
    "integrate_interval",
    "integrate_semi_infinite",
    "SeriesResult",
    "sum_series",
]
