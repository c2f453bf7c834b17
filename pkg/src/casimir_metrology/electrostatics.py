"""Exact sphere-plate electrostatics from the bispherical image series.

The force gradient between a grounded plate and a sphere of radius ``R`` at
closest separation ``a``, held at potential difference ``V - V0``, is

    dF/da = (V - V0)**2 * 2*pi*eps0 / sqrt(a*(2R + a)) * sum_n csch(n*alpha) * {...}

with ``cosh(alpha) = 1 + a/R``. All magnitudes returned here are positive;
the force is attractive.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core.constants import EPS0
from .core.series import sum_series
from .errors import SeriesError, ValidationError

ArrayLike = Union[float, np.ndarray]

SERIES_REL_TOL = 1e-10
MAX_TERMS = 1_000_000
_EXP_CLAMP = 350.0

# Taylor coefficients of x*coth(x) - 1 and x**2*csch(x)**2 - 1 in powers of x**2
_XCOTH_COEFFS = (1 / 3, -1 / 45, 2 / 945, -1 / 4725, 2 / 93555, -1382 / 638512875, 4 / 18243225)
_X2CSCH2_COEFFS = (-1 / 3, 1 / 15, -2 / 189, 1 / 675, -2 / 10395, 1382 / 58046625, -4 / 1403325)
_SERIES_SWITCH = 0.2


@dataclass(frozen=True)
class SpherePlateGeometry:
    """Sphere of radius ``R`` above a plate at surface separation ``a`` (metres).

    ``a`` may be an array. By default ``a < R`` is enforced, which is the
    regime of the experiment; pass ``regime_check=False`` to evaluate the
    far-field (``a >= R``) configuration.
    """

    R: float
    a: ArrayLike
    regime_check: bool = True

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if not self.R > 0:
            raise ValidationError(f"sphere radius must be positive, got R={self.R}")
        if np.any(~(a > 0)):
            raise ValidationError("separation a must be positive")
        if self.regime_check and np.any(a >= self.R):
            raise ValidationError(
                "separation a must be smaller than the sphere radius R "
                "(construct with regime_check=False for a >= R)"
            )


@dataclass(frozen=True)
class ElectricDrive:
    """Applied voltage and residual potential difference, in volts."""

    applied_voltage: float
    residual_potential: float

    @property
    def delta(self):
        return self.applied_voltage - self.residual_potential


def alpha_of(geometry):
    """Return ``arccosh(1 + a/R)`` in the cancellation-safe logarithmic form."""
    x = np.asarray(geometry.a, dtype=float) / geometry.R
    return np.log1p(x + np.sqrt(x * x + 2.0 * x))


def _poly_x2(x, coeffs):
    x2 = x * x
    acc = np.zeros_like(x2)
    for c in reversed(coeffs):
        acc = acc * x2 + c
    return acc * x2


def _xcoth_m1(x):
    """``x*coth(x) - 1`` without cancellation at small ``x``."""
    x = np.asarray(x, dtype=float)
    small = x < _SERIES_SWITCH
    safe = np.where(small, 1.0, x)
    return np.where(small, _poly_x2(x, _XCOTH_COEFFS), safe / np.tanh(safe) - 1.0)


def _x2csch2_m1(x):
    """``x**2*csch(x)**2 - 1`` without cancellation at small ``x``."""
    x = np.asarray(x, dtype=float)
    small = x < _SERIES_SWITCH
    safe = np.where(small, 1.0, np.minimum(x, _EXP_CLAMP))
    return np.where(small, _poly_x2(x, _X2CSCH2_COEFFS), (safe / np.sinh(safe)) ** 2 - 1.0)


def image_series_term(n, alpha):
    """Summand ``csch(n a){n coth(n a)[n coth(n a) - coth a] - csch^2 a + n^2 csch^2(n a)}``.

    The two differences are formed from the smooth functions ``x coth x - 1``
    and ``x^2 csch^2 x - 1`` so that the large ``1/alpha`` pieces cancel
    analytically. Terms with ``n*alpha > 350`` are exactly zero.
    """
    alpha = np.asarray(alpha, dtype=float)
    na = n * alpha
    live = na <= _EXP_CLAMP
    na_s = np.where(live, na, 1.0)
    d_coth = (_xcoth_m1(na_s) - _xcoth_m1(alpha)) / alpha
    d_csch2 = (_x2csch2_m1(na_s) - _x2csch2_m1(alpha)) / alpha**2
    n_coth = (_xcoth_m1(na_s) + 1.0) / alpha
    value = (n_coth * d_coth + d_csch2) / np.sinh(na_s)
    return np.where(live, value, 0.0)


def image_series_sum(alpha, rel_tol=SERIES_REL_TOL, max_terms=MAX_TERMS):
    """Sum of `image_series_term` over ``n >= 1``; returns a `SeriesResult`.

    Terms decay like ``exp(-n*alpha)``, so the neglected tail is roughly
    ``1/alpha`` times the last term. The per-term stopping threshold is
    therefore ``rel_tol * min(alpha, 1) / 10``, making ``rel_tol`` a bound on
    the relative truncation error of the sum itself.
    """
    alpha = np.asarray(alpha, dtype=float)
    term_tol = rel_tol * min(float(np.min(alpha)), 1.0) / 10.0
    # the n = 1 summand vanishes identically
    shape = (-1,) + (1,) * alpha.ndim
    return sum_series(
        lambda n: image_series_term(n.reshape(shape), alpha), term_tol, max_terms, min_terms=2, block=64
    )


def beta_geometric(geometry, rel_tol=SERIES_REL_TOL, max_terms=MAX_TERMS):
    """Electrostatic force gradient per unit squared voltage, N/(m V^2).

    Equal to the parabola curvature ``beta`` divided by the calibration
    constant ``C``.
    """
    a = np.asarray(geometry.a, dtype=float)
    R = geometry.R
    res = image_series_sum(alpha_of(geometry), rel_tol, max_terms)
    if not res.converged:
        raise SeriesError(
            f"image series did not converge within {max_terms} terms "
            f"(partial sum {res.value!r})"
        )
    out = 2.0 * np.pi * EPS0 / np.sqrt(a * (2.0 * R + a)) * res.value
    return out if out.ndim else float(out)


def electric_force_gradient(geometry, drive, **kwargs):
    """Magnitude of the electrostatic force gradient, N/m."""
    return beta_geometric(geometry, **kwargs) * drive.delta**2


def electric_pressure_pfa(geometry, drive, **kwargs):
    """Effective parallel-plate electric pressure, ``gradient / (2 pi R)``, in Pa."""
    return electric_force_gradient(geometry, drive, **kwargs) / (2.0 * np.pi * geometry.R)


def asymptotic_force_gradient(geometry, delta_v):
    """Leading small-``a/R`` form ``pi eps0 R dV^2 / a^2``."""
    a = np.asarray(geometry.a, dtype=float)
    return np.pi * EPS0 * geometry.R * delta_v**2 / a**2
