import json
import subprocess
import sys
from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest

from casimir_metrology.analysis import read_curve_csv
from casimir_metrology.calibrate import CalibrationResult
from casimir_metrology.cli import load_run_config, main
from casimir_metrology.simulate import SweepDataset

CONFIGS = files("casimir_metrology") / "data" / "configs"
DATASETS = files("casimir_metrology") / "data" / "datasets"

SMALL = """
seed = 5

[experiment]
grid = "range"
z_min_nm = 0.0
z_max_nm = 465.0
z_step_nm = 15.0
noise_rad_s = 1.4e-3
separation_jitter_nm = 0.3
drift_rad_s_per_index = 2.0e-5
{extra}

[v0_law]
name = "cleaned-twice"
slope_mV_per_nm = 0.917e-3
intercept_mV = -5.80

[theory]
{theory}
"""


def _write(tmp_path, extra="", theory='grid = "experiment"'):
    p = tmp_path / "run.toml"
    p.write_text(SMALL.format(extra=extra, theory=theory))
    return p


def _run(*args):
    return main([str(a) for a in args])


def test_small_pipeline(tmp_path, capsys):
    cfg = _write(tmp_path)
    out = tmp_path / "out"
    assert _run("simulate", "--config", cfg, "--out", out) == 0
    assert _run("calibrate", "--config", cfg, "--out", out) == 0
    assert _run("theory", "--config", cfg, "--out", out) == 0
    assert _run("report", "--config", cfg, "--out", out) == 0
    text = capsys.readouterr().out
    assert "exclusion band" in text and "compensation mode 'zero'" in text
    names = {p.name for p in out.iterdir()}
    assert names >= {"sweeps.csv", "compensated.csv", "calibration.json", "experiment.csv",
                     "theory_drude.csv", "theory_plasma.csv", "report.json"}
    drude = read_curve_csv(out / "theory_drude.csv")
    plasma = read_curve_csv(out / "theory_plasma.csv")
    assert np.all(plasma.pressures >= drude.pressures)
    head = (out / "theory_plasma.csv").read_text().splitlines()[:8]
    assert any(h.startswith("#temperature_K=") for h in head)
    assert any(h.startswith("#plasma_frequency_eV=") for h in head)
    report = json.loads((out / "report.json").read_text())
    assert "ratio_interpretation" in report["metadata"]
    assert read_curve_csv(out / "experiment.csv").sigmas is not None
    assert (out / "report_experiment.csv").is_file()


def test_simulate_deterministic_and_echoes_truth(tmp_path):
    cfg = _write(tmp_path)
    for d in ("a", "b"):
        assert _run("simulate", "--config", cfg, "--out", tmp_path / d) == 0
    a = (tmp_path / "a" / "sweeps.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweeps.csv").read_bytes()
    ds = SweepDataset.from_csv(tmp_path / "a" / "sweeps.csv")
    assert ds.metadata["truth"] == {
        "a0_m": 235e-9, "C": 1e4, "v0_slope_mV_per_nm": 0.917e-3, "v0_intercept_mV": -5.80,
        "drift_rate_rad_s": 2e-5,
    }
    assert _run("simulate", "--config", cfg, "--out", tmp_path / "c", "--seed", 6) == 0
    assert (tmp_path / "c" / "sweeps.csv").read_bytes() != a


def test_ten_voltages_exit_2(tmp_path, capsys):
    volts = ", ".join(str(v) for v in np.linspace(-150, 140, 10))
    cfg = _write(tmp_path, extra=f"voltages_mV = [{volts}]")
    assert _run("simulate", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "allow_nonstandard_voltage_count" in capsys.readouterr().err


def test_unknown_key_and_bad_toml(tmp_path, capsys):
    cfg = _write(tmp_path, extra="a0_mm = 1.0")
    assert _run("simulate", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "a0_mm" in capsys.readouterr().err
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 1\n")
    assert _run("simulate", "--config", bad, "--out", tmp_path / "o") == 2


def test_missing_optical_table(tmp_path):
    p = _write(tmp_path)
    p.write_text(p.read_text() + '\n[material]\noptical_table = "nowhere.csv"\n')
    assert _run("theory", "--config", p, "--out", tmp_path / "o") == 2


def test_missing_inputs_exit_4(tmp_path):
    cfg = _write(tmp_path)
    assert _run("calibrate", "--config", cfg, "--out", tmp_path / "o") == 4
    assert _run("simulate", "--config", tmp_path / "absent.toml", "--out", tmp_path / "o") == 4


def test_corrupted_row_reports_line(tmp_path, capsys):
    cfg = _write(tmp_path)
    out = tmp_path / "o"
    _run("simulate", "--config", cfg, "--out", out)
    lines = (out / "sweeps.csv").read_text().splitlines()
    n = next(i for i, s in enumerate(lines) if s.startswith("z_piezo_nm")) + 3
    lines[n - 1] = "0.0,abc,1.0,2"
    (out / "sweeps.csv").write_text("\n".join(lines) + "\n")
    assert _run("calibrate", "--config", cfg, "--out", out) == 2
    assert f"line {n}" in capsys.readouterr().err


def test_theory_single_point_and_rerun(tmp_path):
    cfg = _write(tmp_path, theory='grid = "range"\na_min_nm = 300.0\na_max_nm = 300.0')
    out = tmp_path / "o"
    assert _run("theory", "--config", cfg, "--out", out) == 0
    first = (out / "theory_plasma.csv").read_bytes()
    rows = [s for s in first.decode().splitlines() if s and not s.startswith("#")]
    assert len(rows) == 2
    assert _run("theory", "--config", cfg, "--out", out) == 0
    assert (out / "theory_plasma.csv").read_bytes() == first


def test_theory_interpolant_rerun_identical(tmp_path):
    cfg = _write(tmp_path, theory='grid = "range"\na_min_nm = 235.0\na_max_nm = 700.0\na_step_nm = 15.0')
    for d in ("a", "b"):
        assert _run("theory", "--config", cfg, "--out", tmp_path / d) == 0
    for name in ("theory_plasma.csv", "theory_drude.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_empty_experiment_no_partial_report(tmp_path, capsys):
    cfg = _write(tmp_path, theory='grid = "range"\na_min_nm = 300.0\na_max_nm = 300.0')
    out = tmp_path / "o"
    _run("theory", "--config", cfg, "--out", out)
    (out / "experiment.csv").write_text("a_nm,P_Pa,sigma_Pa\n")
    assert _run("report", "--config", cfg, "--out", out) == 2
    assert "empty" in capsys.readouterr().err
    assert not (out / "report.json").exists()


def test_grid_mismatch_exit_2(tmp_path):
    cfg = _write(tmp_path, theory='grid = "range"\na_min_nm = 300.0\na_max_nm = 310.0\na_step_nm = 5.0')
    out = tmp_path / "o"
    _run("theory", "--config", cfg, "--out", out)
    (out / "experiment.csv").write_text("a_nm,P_Pa,sigma_Pa\n301.0,0.1,0.01\n305.0,0.09,0.01\n310.0,0.08,0.01\n")
    assert _run("report", "--config", cfg, "--out", out) == 2
    assert not (out / "report.json").exists()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "casimir_metrology", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout


# --- shipped data ---------------------------------------------------------------
@pytest.mark.parametrize("name, slope, intercept, mean_mv", [
    ("uncleaned", 2.60e-3, 31.95, 33.16),
    ("cleaned", 0.917e-3, -5.80, -5.37),
])
def test_shipped_dataset_round_trip(tmp_path, name, slope, intercept, mean_mv):
    out = tmp_path / name
    cfg = Path(str(CONFIGS / f"{name}.toml"))
    assert _run("calibrate", "--config", cfg, "--out", out, "--sweeps", Path(str(DATASETS / f"{name}_sweeps.csv"))) == 0
    res = CalibrationResult.from_json(out / "calibration.json")
    sd = np.sqrt(np.diag(res.v0_fit.covariance))
    assert abs(res.a0 - 235e-9) < 3 * res.a0_sigma
    assert abs(res.C - 1e4) < 3 * res.C_sigma
    assert abs(res.v0_slope_mv_per_nm - slope) < 3 * sd[0]
    assert abs(res.v0_intercept_mv - intercept) < 3 * sd[1]
    assert res.v0_mean * 1e3 == pytest.approx(mean_mv, abs=0.02)


def test_shipped_datasets_match_configs(tmp_path):
    for name in ("uncleaned", "cleaned"):
        cfg = Path(str(CONFIGS / f"{name}.toml"))
        assert _run("simulate", "--config", cfg, "--out", tmp_path / name) == 0
        shipped = Path(str(DATASETS / f"{name}_sweeps.csv")).read_bytes()
        assert (tmp_path / name / "sweeps.csv").read_bytes() == shipped


@pytest.fixture(scope="module")
def shipped_demo(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    cfg = Path(str(CONFIGS / "cleaned.toml"))
    for verb in ("simulate", "calibrate", "theory"):
        assert _run(verb, "--config", cfg, "--out", out) == 0
    return cfg, out


def test_shipped_demo_drude_band(shipped_demo, capsys):
    cfg, out = shipped_demo
    capsys.readouterr()
    assert _run("report", "--config", cfg, "--out", out) == 0
    text = capsys.readouterr().out
    rep = json.loads((out / "report.json").read_text())
    lo, hi = rep["exclusion_band_nm"]["drude"]
    assert lo == pytest.approx(235.0, abs=0.5) and 380 <= hi <= 420
    assert rep["consistent_fraction"]["plasma"] >= 0.95
    assert "Drude: consistent" in text and "exclusion band 235-" in text
    assert rep["ratio_tables"][0]["law"] == "cleaned-twice"


def test_shipped_demo_mean_compensation(shipped_demo):
    cfg, out = shipped_demo
    assert _run("report", "--config", cfg, "--out", out, "--compensation", "mean") == 0
    rep = json.loads((out / "report.json").read_text())
    t = rep["ratio_tables"][0]
    assert t["compensation_mode"] == "mean"
    assert all(r["percent"] < 0.1 for r in t["rows"])


def test_uncleaned_ratio_first_row(tmp_path, capsys):
    cfg = Path(str(CONFIGS / "uncleaned.toml"))
    out = tmp_path / "u"
    for verb in ("simulate", "calibrate", "theory", "report"):
        assert _run(verb, "--config", cfg, "--out", out) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["ratio_tables"][0]["rows"][0]["percent"] == pytest.approx(30, rel=0.2)


def test_config_loader_reports_source():
    cfg = load_run_config(Path(str(CONFIGS / "cleaned.toml")))
    assert cfg.source.endswith("cleaned.toml") and cfg.experiment.z_grid.size == 466
