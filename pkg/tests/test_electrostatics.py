import time

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from casimir_metrology.core.constants import EPS0
from casimir_metrology.electrostatics import (
    ElectricDrive,
    SpherePlateGeometry,
    alpha_of,
    asymptotic_force_gradient,
    beta_geometric,
    electric_force_gradient,
    electric_pressure_pfa,
    image_series_sum,
    image_series_term,
)
from casimir_metrology.errors import SeriesError, ValidationError

R = 60.8e-6
# frozen from the full series (checked against an mpmath summation below)
BETA_235 = 0.0305847774


def _mp_beta(a, R, terms=3000):
    mpmath.mp.prec = 128
    a, R = mpmath.mpf(a), mpmath.mpf(R)
    al = mpmath.acosh(1 + a / R)
    s = mpmath.mpf(0)
    for n in range(1, terms + 1):
        na = n * al
        s += mpmath.csch(na) * (
            n * mpmath.coth(na) * (n * mpmath.coth(na) - mpmath.coth(al)) - mpmath.csch(al) ** 2 + n**2 * mpmath.csch(na) ** 2
        )
    return float(2 * mpmath.pi * mpmath.mpf(EPS0) / mpmath.sqrt(a * (2 * R + a)) * s)


# --- geometry ----------------------------------------------------------------
def test_geometry_validation():
    with pytest.raises(ValidationError):
        SpherePlateGeometry(-1.0, 1e-7)
    with pytest.raises(ValidationError):
        SpherePlateGeometry(R, 0.0)
    with pytest.raises(ValidationError, match="regime_check"):
        SpherePlateGeometry(R, 2 * R)
    SpherePlateGeometry(R, 2 * R, regime_check=False)


def test_drive_delta():
    assert ElectricDrive(0.05, 0.02).delta == pytest.approx(0.03)


# --- alpha -------------------------------------------------------------------
def test_alpha_small_limit():
    x = 1e-6
    alpha = alpha_of(SpherePlateGeometry(1.0, x))
    assert abs(alpha / np.sqrt(2 * x) - 1) < 1e-6


def test_alpha_at_a_equals_r():
    alpha = alpha_of(SpherePlateGeometry(1.0, 1.0, regime_check=False))
    assert alpha == pytest.approx(1.3169578969248166, rel=1e-15)


def test_alpha_extended_precision_oracle():
    mpmath.mp.prec = 128
    exact = mpmath.acosh(1 + mpmath.mpf(235e-9) / mpmath.mpf(R))
    assert abs(alpha_of(SpherePlateGeometry(R, 235e-9)) / float(exact) - 1) < 1e-12


@given(st.floats(1e-12, 1e3))
@hsettings(max_examples=100, deadline=None)
def test_alpha_matches_arccosh(x):
    alpha = alpha_of(SpherePlateGeometry(1.0, x, regime_check=False))
    mpmath.mp.prec = 128
    assert abs(alpha / float(mpmath.acosh(1 + mpmath.mpf(x))) - 1) < 1e-13


# --- summand -----------------------------------------------------------------
def test_first_summand_vanishes_at_alpha_one():
    # n = 1: coth(a)[coth(a) - coth(a)] - csch^2 a + csch^2 a = 0
    assert abs(image_series_term(1, 1.0)) < 1e-12


def test_summand_hand_expansion():
    a = 1.0
    for n in (2, 3, 7):
        na = n * a
        csch = lambda x: 1 / np.sinh(x)  # noqa: E731
        coth = lambda x: 1 / np.tanh(x)  # noqa: E731
        direct = csch(na) * (n * coth(na) * (n * coth(na) - coth(a)) - csch(a) ** 2 + n**2 * csch(na) ** 2)
        assert image_series_term(n, a) == pytest.approx(direct, rel=1e-12)


@given(st.floats(1e-4, 3.0), st.integers(2, 60))
@hsettings(max_examples=80, deadline=None)
def test_summand_fused_form_matches_mpmath(alpha, n):
    mpmath.mp.prec = 160
    al = mpmath.mpf(alpha)
    na = n * al
    exact = mpmath.csch(na) * (
        n * mpmath.coth(na) * (n * mpmath.coth(na) - mpmath.coth(al)) - mpmath.csch(al) ** 2 + n**2 * mpmath.csch(na) ** 2
    )
    got = image_series_term(n, alpha)
    # the two O(1) pieces cancel to O(alpha^2) for small n*alpha, costing eps/alpha^2 relative
    assert abs(got - float(exact)) <= (1e-9 + 1e-15 / alpha**2) * abs(float(exact))


def test_summand_clamped_to_zero():
    assert image_series_term(400, 1.0) == 0.0


# --- beta --------------------------------------------------------------------
def test_beta_golden_and_mpmath():
    b = beta_geometric(SpherePlateGeometry(R, 235e-9))
    assert b == pytest.approx(BETA_235, rel=1e-7)
    assert b == pytest.approx(_mp_beta(235e-9, R), rel=1e-10)


def test_beta_doubling_terms():
    a = np.linspace(235e-9, 700e-9, 12)
    alpha = alpha_of(SpherePlateGeometry(R, a))
    res = image_series_sum(alpha)
    n = np.arange(1, 2 * res.terms_used + 1)
    longer = np.array([np.sum(image_series_term(n, al)) for al in alpha])
    assert np.max(np.abs(res.value / longer - 1)) < 1e-9


def test_beta_far_field_monotone_decay():
    a = R * 2.0 ** np.arange(11)
    b = np.array([beta_geometric(SpherePlateGeometry(R, x, regime_check=False)) for x in a])
    assert np.all(np.diff(b) < 0)
    assert b[-1] / b[0] < 1e-4


def test_beta_strictly_decreasing_log_grid():
    a = np.geomspace(100e-9, 5e-6, 60)
    b = beta_geometric(SpherePlateGeometry(R, a))
    assert np.all(np.diff(b) < 0)


def test_series_cap_raises():
    with pytest.raises(SeriesError):
        beta_geometric(SpherePlateGeometry(R, 235e-9), max_terms=10)


# --- force gradient and pressure --------------------------------------------
def test_gradient_zero_when_compensated():
    g = SpherePlateGeometry(R, 300e-9)
    assert electric_force_gradient(g, ElectricDrive(0.02, 0.02)) == 0.0
    assert electric_pressure_pfa(g, ElectricDrive(0.02, 0.02)) == 0.0


def test_gradient_quadratic_scaling():
    g = SpherePlateGeometry(R, 300e-9)
    f1 = electric_force_gradient(g, ElectricDrive(0.01, 0.0))
    f4 = electric_force_gradient(g, ElectricDrive(0.04, 0.0))
    assert f4 / f1 == pytest.approx(16.0, rel=1e-14)


def test_gradient_uncleaned_value():
    g = SpherePlateGeometry(R, 235e-9)
    f = electric_force_gradient(g, ElectricDrive(33.16e-3, 0.0))
    asym = asymptotic_force_gradient(g, 33.16e-3)
    assert abs(f / asym - 1) < 2 * 235e-9 / R
    assert f == pytest.approx(3.3e-5, rel=0.05)
    assert f == pytest.approx(BETA_235 * 33.16e-3**2, rel=1e-7)


@pytest.mark.parametrize("ratio", [1e-5, 1e-4, 1e-3, 1e-2])
def test_asymptote_within_two_a_over_r(ratio):
    g = SpherePlateGeometry(R, ratio * R)
    f = electric_force_gradient(g, ElectricDrive(0.1, 0.0))
    assert abs(f / asymptotic_force_gradient(g, 0.1) - 1) < 2 * ratio


def test_parallel_plate_limit_independent_of_radius():
    a, dv = 1e-9, 0.05
    plate = EPS0 * dv**2 / (2 * a**2)
    for radius in (1e-4, 2e-4):
        p = electric_pressure_pfa(SpherePlateGeometry(radius, a), ElectricDrive(dv, 0.0))
        assert abs(p / plate - 1) < 4 * a / radius


def test_pressure_ratio_uncleaned(plasma_interp):
    g = SpherePlateGeometry(R, 235e-9)
    p = electric_pressure_pfa(g, ElectricDrive(33.16e-3, 0.0))
    assert 100 * p / plasma_interp(235e-9) == pytest.approx(30.0, rel=0.1)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(200e-9, 5e-6))
@hsettings(max_examples=40, deadline=None)
def test_pressure_non_negative(v, v0, a):
    p = electric_pressure_pfa(SpherePlateGeometry(R, a), ElectricDrive(v, v0))
    assert p >= 0
    assert (p == 0) == ((v - v0) ** 2 == 0)


def test_vectorised_grid_fast():
    a = np.linspace(235e-9, 700e-9, 466)
    t0 = time.perf_counter()
    beta_geometric(SpherePlateGeometry(R, a))
    assert time.perf_counter() - t0 < 1.0
