import io
import threading

import numpy as np
import pytest

from casimir_metrology.core.constants import EV, HBAR, K_B
from casimir_metrology.errors import ValidationError
from casimir_metrology.optics import (
    DRUDE,
    PLASMA,
    DrudeParameters,
    OpticalTable,
    PermittivityModel,
    drude_table,
    eps_imag_axis,
    im_eps,
    load_optical_table,
    matsubara_grid,
    write_optical_table,
)

TOY = "# material=toy\n# source=hand made\nenergy_eV,n,k\n0.5,1.25,3.5\n1.0,0.75,2.0\n2.0,1.5,0.0\n"


# --- table I/O ---------------------------------------------------------------
def test_toy_table_bit_exact():
    t = load_optical_table(TOY)
    assert t.energy_ev.tolist() == [0.5, 1.0, 2.0]
    assert t.n.tolist() == [1.25, 0.75, 1.5]
    assert t.k.tolist() == [3.5, 2.0, 0.0]
    assert t.material == "toy" and t.source == "hand made"


@pytest.mark.parametrize("kind", ["bytes", "stream", "path"])
def test_table_sources(kind, tmp_path):
    if kind == "bytes":
        src = TOY.encode()
    elif kind == "stream":
        src = io.BytesIO(TOY.encode())
    else:
        src = tmp_path / "t.csv"
        src.write_text(TOY)
    assert len(load_optical_table(src)) == 3


def test_duplicate_energy_named():
    bad = "energy_eV,n,k\n0.5,1,1\n1.25,1,1\n1.25,2,2\n"
    with pytest.raises(ValidationError, match="1.25"):
        load_optical_table(bad)


def test_unsorted_rejected():
    with pytest.raises(ValidationError):
        load_optical_table("energy_eV,n,k\n2,1,1\n1,1,1\n")


def test_parse_error_reports_line():
    with pytest.raises(ValidationError, match="line 3"):
        load_optical_table("energy_eV,n,k\n1,1,1\n2,abc,1\n")


def test_bad_header_and_values():
    with pytest.raises(ValidationError):
        load_optical_table("E,n,k\n1,1,1\n")
    with pytest.raises(ValidationError):
        load_optical_table("energy_eV,n,k\n1,-1,1\n2,1,1\n")
    with pytest.raises(ValidationError):
        load_optical_table("energy_eV,n,k\n1,1,-1\n2,1,1\n")


def test_write_round_trip(tmp_path, au_table):
    path = tmp_path / "au.csv"
    write_optical_table(au_table, path)
    again = load_optical_table(path)
    assert np.array_equal(again.energy_ev, au_table.energy_ev)
    assert np.array_equal(again.n, au_table.n)
    assert np.array_equal(again.k, au_table.k)


def test_shipped_table_passes_gate(au_table):
    au_table.check_coverage()
    assert len(au_table) >= 50 and au_table.decades >= 3
    assert au_table.material == "Au"


def test_toy_table_fails_gate():
    t = load_optical_table(TOY)
    with pytest.raises(ValidationError):
        t.check_coverage()
    with pytest.raises(ValidationError):
        PermittivityModel(DRUDE, t)


# --- Im eps --------------------------------------------------------------------
def test_im_eps_node_identity(au_table):
    for i in (0, 17, 80, len(au_table) - 1):
        w = au_table.energy_ev[i] * EV
        assert im_eps(au_table, w) == pytest.approx(2 * au_table.n[i] * au_table.k[i], rel=1e-14)


def test_im_eps_midpoint_between_nodes(au_table):
    for i in range(0, len(au_table) - 1, 7):
        w = np.sqrt(au_table.omega[i] * au_table.omega[i + 1])
        lo, hi = sorted(au_table.im_eps_nodes[i : i + 2])
        assert lo <= im_eps(au_table, w) <= hi


def test_im_eps_lossless_row():
    t = load_optical_table(TOY)
    assert im_eps(t, 2.0 * EV) == 0.0
    assert 0.0 <= im_eps(t, 1.5 * EV) <= 2 * 0.75 * 2.0


def test_im_eps_out_of_range(au_table):
    with pytest.raises(ValidationError):
        im_eps(au_table, au_table.omega[0] * 0.5)
    with pytest.raises(ValidationError):
        im_eps(au_table, au_table.omega[-1] * 2)


# --- Drude parameters and models --------------------------------------------
def test_drude_parameter_validation():
    with pytest.raises(ValidationError):
        DrudeParameters(0.0, 0.035)
    with pytest.raises(ValidationError):
        DrudeParameters(9.0, -1.0)


def test_model_variant_validation(au_table):
    with pytest.raises(ValidationError):
        PermittivityModel("lorentz", au_table)


def test_transparency_limit(drude_model, au_table):
    xi = 1e4 * au_table.omega[-1]
    assert abs(eps_imag_axis(drude_model, xi) - 1) < 1e-3


def test_plasma_lower_bound(plasma_model):
    wp = plasma_model.drude.omega_p
    assert eps_imag_axis(plasma_model, wp) >= 2.0


def test_drude_synthetic_table_matches_closed_form():
    d = DrudeParameters(9.0, 0.035)
    model = PermittivityModel(DRUDE, drude_table(d, 0.01, 300.0, 200), d)
    xi = np.geomspace(0.01, 10, 25) * EV
    assert np.allclose(eps_imag_axis(model, xi), d.eps_imag_axis(xi), rtol=1e-2)


def test_plasma_on_drude_table_is_pure_plasma():
    d = DrudeParameters(9.0, 0.035)
    model = PermittivityModel(PLASMA, drude_table(d, 0.01, 300.0, 200), d)
    xi = np.geomspace(0.01, 10, 10) * EV
    assert np.allclose(eps_imag_axis(model, xi), 1 + d.omega_p**2 / xi**2, rtol=1e-9)


@pytest.mark.parametrize("variant", [DRUDE, PLASMA])
def test_eps_at_least_one_and_non_increasing(au_table, variant):
    model = PermittivityModel(variant, au_table)
    xi = np.geomspace(1e12, 1e18, 100)
    e = eps_imag_axis(model, xi)
    assert np.all(e >= 1)
    assert np.all(np.diff(e) <= 0)


def test_plasma_minus_drude_low_frequency(plasma_model, drude_model):
    wp2 = plasma_model.drude.omega_p ** 2
    ratios = []
    for xi in (1e11, 1e10, 1e9):
        ratios.append((eps_imag_axis(plasma_model, xi) - eps_imag_axis(drude_model, xi)) / (wp2 / xi**2))
    # tends to 1 as xi -> 0; the remainder shrinks with xi
    assert abs(ratios[-1] - 1) < 0.05
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)


def test_kk_tolerance_halving(drude_model, plasma_model):
    xi = np.array([2.468e14, 1e15, 1e16])
    for m in (drude_model, plasma_model):
        a = eps_imag_axis(m, xi, rel_tol=1e-10)
        b = eps_imag_axis(m, xi, rel_tol=5e-11)
        assert np.max(np.abs(a / b - 1)) < 1e-6


def test_xi_must_be_positive(drude_model):
    with pytest.raises(ValidationError):
        eps_imag_axis(drude_model, 0.0)


def test_memo_is_thread_safe(au_table):
    model = PermittivityModel(DRUDE, au_table)
    xi = np.geomspace(1e13, 1e17, 40)
    ref = PermittivityModel(DRUDE, au_table).eps(xi)
    out = [None] * 4

    def work(i):
        out[i] = model.eps(xi)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for o in out:
        assert np.array_equal(o, ref)


def test_with_variant(drude_model):
    p = drude_model.with_variant(PLASMA)
    assert p.variant == PLASMA and p.table is drude_model.table


# --- Matsubara grid ----------------------------------------------------------
def test_matsubara_grid():
    g = matsubara_grid(300.0, 10)
    assert g[0] == 0.0 and g.size == 11
    assert g[1] == pytest.approx(2.468e14, rel=1e-3)
    assert g[1] == pytest.approx(2 * np.pi * K_B * 300 / HBAR, rel=1e-15)
    assert np.array_equal(matsubara_grid(600.0, 10), 2 * g)
    with pytest.raises(ValidationError):
        matsubara_grid(0.0, 5)
    with pytest.raises(ValidationError):
        matsubara_grid(300.0, 0)


def test_table_is_immutable(au_table):
    with pytest.raises(Exception):
        au_table.material = "Ag"
    assert isinstance(au_table, OpticalTable)
