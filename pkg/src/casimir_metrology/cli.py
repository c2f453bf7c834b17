"""Command-line pipeline: ``simulate``, ``calibrate``, ``theory``, ``report``.

Every verb takes ``--config <toml>`` and ``--out <dir>`` and writes only
under ``--out``. Configuration keys carry their units in the name.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""
import argparse
import sys
from dataclasses import dataclass, field, replace
from importlib.resources import files
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analysis, calibrate as cal, simulate as sim
from .core.constants import MV, NM
from .errors import NumericalError, ValidationError
from .lifshitz import LifshitzSettings, PressureCurve, PressureInterpolant, casimir_pressure_plates
from .optics import DRUDE, PLASMA, DrudeParameters, PermittivityModel, load_optical_table

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
BUILTIN_TABLE = "builtin:au"

SWEEPS_CSV = "sweeps.csv"
COMPENSATED_CSV = "compensated.csv"
CALIBRATION_JSON = "calibration.json"
EXPERIMENT_CSV = "experiment.csv"
THEORY_CSV = {DRUDE: "theory_drude.csv", PLASMA: "theory_plasma.csv"}

_SCHEMA = {
    "": {"seed"},
    "geometry": {"radius_um"},
    "experiment": {
        "a0_nm", "calibration_constant_rad_m_per_N_s", "grid", "z_min_nm", "z_max_nm", "z_step_nm",
        "voltages_mV", "voltage_half_span_mV", "allow_nonstandard_voltage_count", "noise_rad_s",
        "separation_jitter_nm", "drift_rad_s_per_index", "repeats", "include_casimir", "truth_model",
    },
    "v0_law": {"name", "slope_mV_per_nm", "intercept_mV"},
    "material": {"optical_table", "plasma_frequency_eV", "damping_eV"},
    "theory": {
        "temperature_K", "l_max", "k_rel_tol", "series_rel_tol", "grid", "a_min_nm", "a_max_nm",
        "a_step_nm", "method", "interpolant_nodes",
    },
    "analysis": {
        "confidence", "sigma_a_nm", "systematic_rel", "systematic_abs_Pa", "compensation",
        "ratio_separations_nm", "ratio_law",
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated pipeline configuration (SI units)."""

    experiment: sim.ExperimentConfig
    repeats: int = analysis.DEFAULT_REPEATS
    truth_model: str = PLASMA
    optical_table: str = BUILTIN_TABLE
    drude: DrudeParameters = field(default_factory=DrudeParameters)
    settings: LifshitzSettings = field(default_factory=LifshitzSettings)
    theory_grid: str = "experiment"
    theory_range: Optional[tuple] = None
    theory_method: str = "interpolant"
    interpolant_nodes: int = 31
    budget: analysis.ErrorBudget = field(default_factory=analysis.ErrorBudget)
    compensation: str = analysis.COMPENSATION_ZERO
    ratio_separations: tuple = (235e-9, 300e-9, 400e-9, 700e-9)
    ratio_law: Optional[sim.V0Law] = None
    source: str = ""

    def table(self):
        if self.optical_table == BUILTIN_TABLE:
            return load_optical_table(files("casimir_metrology") / "data" / "au_optical.csv")
        return load_optical_table(Path(self.optical_table))

    def model(self, variant):
        return PermittivityModel(variant, self.table(), self.drude)


def _check_keys(doc):
    for section, allowed in _SCHEMA.items():
        part = doc if section == "" else doc.get(section, {})
        if section and not isinstance(part, dict):
            raise ValidationError(f"config section [{section}] must be a table")
        keys = {k for k, v in part.items() if not (section == "" and isinstance(v, dict))}
        unknown = keys - allowed
        if unknown:
            where = f"[{section}]" if section else "top level"
            raise ValidationError(f"unknown config key(s) {sorted(unknown)} at {where}")
    extra = {k for k, v in doc.items() if isinstance(v, dict)} - set(_SCHEMA)
    if extra:
        raise ValidationError(f"unknown config section(s) {sorted(extra)}")


def _si(value, per_unit):
    """Convert a unit-suffixed config value exactly, e.g. ``_si(235.0, 1e9)`` nm to m."""
    return np.asarray(value, dtype=float) / per_unit if np.ndim(value) else float(value) / per_unit


def _law(d, default):
    if not d:
        return default
    return sim.V0Law(float(d["slope_mV_per_nm"]), float(d["intercept_mV"]), str(d.get("name", "")))


def parse_run_config(doc, base_dir=Path("."), seed=None):
    """Build a `RunConfig` from a parsed TOML document."""
    _check_keys(doc)
    g = doc.get("geometry", {})
    e = doc.get("experiment", {})
    m = doc.get("material", {})
    t = doc.get("theory", {})
    a = doc.get("analysis", {})

    law = _law(doc.get("v0_law"), sim.CLEANED_TWICE)
    a0 = _si(e.get("a0_nm", 235.0), 1e9)
    if e.get("grid", "range") == "figure":
        z = analysis.figure_grid() - a0
    elif e.get("grid", "range") == "range":
        z_min = float(e.get("z_min_nm", 0.0))
        z_max = float(e.get("z_max_nm", 465.0))
        step = float(e.get("z_step_nm", 1.0))
        if not step > 0 or z_max < z_min:
            raise ValidationError("experiment z grid needs z_step_nm > 0 and z_max_nm >= z_min_nm")
        z = _si(z_min + step * np.arange(int(round((z_max - z_min) / step)) + 1), 1e9)
    else:
        raise ValidationError("[experiment] grid must be 'range' or 'figure'")
    voltages = None
    if "voltages_mV" in e:
        voltages = _si(e["voltages_mV"], 1e3)
    elif "voltage_half_span_mV" in e:
        a_mid = a0 + 0.5 * (z.min() + z.max())
        voltages = sim.default_voltages(sim.v0_at(law, a_mid), _si(e["voltage_half_span_mV"], 1e3))
    exp = sim.ExperimentConfig(
        R=_si(g.get("radius_um", 60.8), 1e6),
        a0=a0,
        C=float(e.get("calibration_constant_rad_m_per_N_s", sim.DEFAULT_C)),
        v0_law=law,
        voltages=voltages,
        z_grid=z,
        noise_sigma=float(e.get("noise_rad_s", 0.0)),
        separation_jitter=_si(e.get("separation_jitter_nm", 0.0), 1e9),
        drift_rate=float(e.get("drift_rad_s_per_index", 0.0)),
        seed=int(doc.get("seed", 0) if seed is None else seed),
        include_casimir=bool(e.get("include_casimir", True)),
        allow_nonstandard_voltage_count=bool(e.get("allow_nonstandard_voltage_count", False)),
    )
    truth = e.get("truth_model", PLASMA)
    if truth not in (PLASMA, DRUDE):
        raise ValidationError("[experiment] truth_model must be 'plasma' or 'drude'")
    repeats = int(e.get("repeats", analysis.DEFAULT_REPEATS))
    if repeats < 2:
        raise ValidationError("[experiment] repeats must be at least 2")

    table = m.get("optical_table", BUILTIN_TABLE)
    if table != BUILTIN_TABLE:
        path = (base_dir / table).resolve()
        if not path.is_file():
            raise ValidationError(f"optical table not found: {path}")
        table = str(path)
    drude = DrudeParameters(float(m.get("plasma_frequency_eV", 9.0)), float(m.get("damping_eV", 0.035)))

    settings = LifshitzSettings(
        temperature=float(t.get("temperature_K", 300.0)),
        l_max=int(t.get("l_max", 5000)),
        k_rel_tol=float(t.get("k_rel_tol", 1e-10)),
        series_rel_tol=float(t.get("series_rel_tol", 1e-10)),
    )
    grid = t.get("grid", "experiment")
    rng = None
    if grid == "range":
        lo, hi = _si(t["a_min_nm"], 1e9), _si(t["a_max_nm"], 1e9)
        step = _si(t.get("a_step_nm", 1.0), 1e9)
        if not (lo > 0 and hi >= lo and step > 0):
            raise ValidationError("[theory] range needs 0 < a_min_nm <= a_max_nm and a_step_nm > 0")
        rng = (lo, hi, step)
    elif grid not in ("experiment", "figure"):
        raise ValidationError("[theory] grid must be 'experiment', 'figure' or 'range'")
    method = t.get("method", "interpolant")
    if method not in ("exact", "interpolant"):
        raise ValidationError("[theory] method must be 'exact' or 'interpolant'")

    budget = analysis.ErrorBudget(
        sigma_a=_si(a.get("sigma_a_nm", 0.5), 1e9),
        confidence=float(a.get("confidence", analysis.DEFAULT_CONFIDENCE)),
        systematic_rel=float(a.get("systematic_rel", analysis.DEFAULT_SYSTEMATIC_REL)),
        systematic_abs=float(a.get("systematic_abs_Pa", analysis.DEFAULT_SYSTEMATIC_ABS)),
    )
    comp = a.get("compensation", analysis.COMPENSATION_ZERO)
    if comp not in (analysis.COMPENSATION_ZERO, analysis.COMPENSATION_MEAN):
        raise ValidationError("[analysis] compensation must be 'zero' or 'mean'")
    ratio_a = tuple(_si(x, 1e9) for x in a.get("ratio_separations_nm", (235, 300, 400, 700)))
    return RunConfig(
        experiment=exp, repeats=repeats, truth_model=truth, optical_table=table, drude=drude,
        settings=settings, theory_grid=grid, theory_range=rng, theory_method=method,
        interpolant_nodes=int(t.get("interpolant_nodes", 31)), budget=budget, compensation=comp,
        ratio_separations=ratio_a, ratio_law=_law(a.get("ratio_law"), None),
    )


def load_run_config(path, seed=None):
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: invalid TOML: {exc}") from None
    return replace(parse_run_config(doc, path.parent, seed), source=str(path))


# --- helpers -----------------------------------------------------------------
def _casimir_interpolant(cfg, variant, a_values, pad=20e-9):
    a_values = np.asarray(a_values, dtype=float)
    lo = max(a_values.min() - pad, 1.01 * 50e-9)
    return PressureInterpolant.from_model(
        cfg.model(variant), cfg.settings, lo, a_values.max() + pad, cfg.interpolant_nodes
    )


def _theory_grid(cfg, out):
    if cfg.theory_grid == "figure":
        return analysis.figure_grid()
    if cfg.theory_grid == "range":
        lo, hi, step = cfg.theory_range
        return lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    exp_path = out / EXPERIMENT_CSV
    if not exp_path.is_file():
        raise FileNotFoundError(f"{exp_path} not found; run 'calibrate' first or set [theory] grid")
    return analysis.read_curve_csv(exp_path).separations


def _say(msg):
    print(msg, flush=True)


# --- verbs -------------------------------------------------------------------
def cmd_simulate(cfg, out):
    """Calibration sweeps and compensated repeats for the configured truth."""
    exp = cfg.experiment
    casimir = None
    if exp.include_casimir:
        casimir = _casimir_interpolant(cfg, cfg.truth_model, exp.separations, pad=20e-9 + 10 * exp.separation_jitter)
    sweeps = sim.generate_sweeps(exp, casimir=casimir)
    sweeps.metadata["truth_model"] = cfg.truth_model
    sweeps.metadata["v0_law"] = exp.v0_law.name
    sweeps.to_csv(out / SWEEPS_CSV)
    v_comp = float(np.mean(sim.v0_at(exp.v0_law, exp.separations)))
    # drift is only identifiable from anchored sweeps, so the compensated run is drift-free
    comp_cfg = replace(exp, seed=exp.seed + 1, voltages=exp.voltages, drift_rate=0.0, anchors=False)
    comp = sim.generate_compensated(comp_cfg, v_comp, cfg.repeats, casimir=casimir)
    comp.metadata["truth_model"] = cfg.truth_model
    comp.to_csv(out / COMPENSATED_CSV)
    _say(f"wrote {len(sweeps)} sweep records and {len(comp)} compensated records to {out}")
    _say(f"sha256 sweeps {sweeps.checksum()}")
    return EXIT_OK


def cmd_calibrate(cfg, out, sweeps_path=None, compensated_path=None):
    """Drift removal, calibration chain and (if available) pressure extraction."""
    sweeps = sim.SweepDataset.from_csv(Path(sweeps_path or out / SWEEPS_CSV))
    if sweeps.metadata.get("config", {}).get("anchors", True):
        sweeps = sim.subtract_drift(sweeps)
    result = cal.run_calibration(sweeps, cfg.experiment.R)
    result.metadata["drift_rate_estimate"] = sweeps.metadata.get("drift_rate_estimate")
    result.to_json(out / CALIBRATION_JSON)
    _say(f"a0 = {result.a0 / NM:.3f} +- {result.a0_sigma / NM:.3f} nm")
    _say(f"C = {result.C:.6g} +- {result.C_sigma:.2g} rad m/(N s)")
    _say(
        f"V0 = {result.v0_slope_mv_per_nm:.4g} mV/nm * a + {result.v0_intercept_mv:.4g} mV; "
        f"mean V0 = {result.v0_mean / MV:.3f} mV"
    )
    comp_path = Path(compensated_path or out / COMPENSATED_CSV)
    if comp_path.is_file():
        comp = sim.SweepDataset.from_csv(comp_path)
        if comp.metadata.get("config", {}).get("anchors", True):
            comp = sim.subtract_drift(comp)
        curve = analysis.extract_pressure(comp, result, cfg.experiment.R, cfg.budget.confidence)
        analysis.write_curve_csv(curve, out / EXPERIMENT_CSV, {"sigma": "random standard error only"})
        _say(f"extracted {len(curve)} pressures to {out / EXPERIMENT_CSV}")
    return EXIT_OK


def cmd_theory(cfg, out):
    """Drude and plasma pressure curves on the configured grid."""
    a = _theory_grid(cfg, out)
    for variant in (DRUDE, PLASMA):
        if cfg.theory_method == "exact" or a.size < 4:
            p = casimir_pressure_plates(a, cfg.model(variant), cfg.settings)
        else:
            p = _casimir_interpolant(cfg, variant, a, pad=5e-9)(a)
        curve = PressureCurve(a, np.atleast_1d(p), None, f"lifshitz-{variant}")
        s = cfg.settings
        header = {
            "model": variant,
            "temperature_K": s.temperature,
            "l_max": s.l_max,
            "k_rel_tol": s.k_rel_tol,
            "series_rel_tol": s.series_rel_tol,
            "plasma_frequency_eV": cfg.drude.plasma_frequency_ev,
            "damping_eV": cfg.drude.gamma_ev,
            "optical_table": cfg.optical_table if cfg.optical_table == BUILTIN_TABLE else Path(cfg.optical_table).name,
            "method": cfg.theory_method if a.size >= 4 else "exact",
        }
        analysis.write_curve_csv(curve, out / THEORY_CSV[variant], header)
    _say(f"wrote Drude and plasma curves ({a.size} separations) to {out}")
    return EXIT_OK


def cmd_report(cfg, out, experiment_path=None, compensation=None):
    """Compare the experimental curve with both theories and tabulate ratios."""
    exp_path = Path(experiment_path or out / EXPERIMENT_CSV)
    experiment = analysis.read_curve_csv(exp_path)
    if len(experiment) == 0:
        raise ValidationError("experiment curve is empty")
    drude = analysis.read_curve_csv(out / THEORY_CSV[DRUDE])
    plasma = analysis.read_curve_csv(out / THEORY_CSV[PLASMA])
    analysis.check_same_grid(drude, plasma)
    analysis.check_same_grid(experiment, plasma)
    budget = cfg.budget
    if experiment.sigmas is None:
        raise ValidationError("experiment curve carries no sigmas")
    experiment = analysis.total_experimental_error(experiment, budget, plasma if len(plasma) >= 3 else None)

    mode = compensation or cfg.compensation
    law = cfg.ratio_law or cfg.experiment.v0_law
    comp_v = 0.0
    if mode == analysis.COMPENSATION_MEAN:
        cal_path = out / CALIBRATION_JSON
        if cal_path.is_file():
            comp_v = cal.CalibrationResult.from_json(cal_path).v0_mean
        else:
            comp_v = float(np.mean(sim.v0_at(law, experiment.separations)))
    ratio = analysis.electric_to_casimir_ratio(
        cfg.ratio_separations, law, comp_v, cfg.experiment.R, cfg.model(PLASMA), cfg.settings,
        compensation_mode=mode,
    )
    meta = {
        "ratio_interpretation": (
            f"electric pressure of dV = V0(a) - {comp_v / MV:g} mV with law '{ratio.law}' "
            f"({law.slope_mv_per_nm:g} mV/nm, {law.intercept_mv:g} mV); "
            f"compensation mode '{mode}'; Casimir pressure from the plasma model"
        ),
        "error_budget": {
            "sigma_a_m": budget.sigma_a,
            "systematic_rel": budget.systematic_rel,
            "systematic_abs_Pa": budget.systematic_abs,
        },
        "config": cfg.source,
    }
    report = analysis.compare_with_theory(experiment, drude, plasma, budget.confidence, [ratio], meta)
    report.write(out)
    _say(report.summary())
    _say(meta["ratio_interpretation"])
    return EXIT_OK


# --- entry point -------------------------------------------------------------
def build_parser():
    p = argparse.ArgumentParser(prog="casimir-metrology", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path, help="TOML run configuration")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")

    common(sub.add_parser("simulate", help="generate synthetic sweeps"))
    c = sub.add_parser("calibrate", help="fit a0, C and the V0 line; extract pressures")
    common(c)
    c.add_argument("--sweeps", type=Path, default=None, help=f"sweep CSV (default <out>/{SWEEPS_CSV})")
    c.add_argument("--compensated", type=Path, default=None, help=f"compensated CSV (default <out>/{COMPENSATED_CSV})")
    common(sub.add_parser("theory", help="Drude and plasma pressure curves"))
    r = sub.add_parser("report", help="compare experiment with theory")
    common(r)
    r.add_argument("--experiment", type=Path, default=None, help=f"experiment CSV (default <out>/{EXPERIMENT_CSV})")
    r.add_argument("--compensation", choices=(analysis.COMPENSATION_ZERO, analysis.COMPENSATION_MEAN), default=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, args.seed)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "calibrate":
            return cmd_calibrate(cfg, out, args.sweeps, args.compensated)
        if args.command == "theory":
            return cmd_theory(cfg, out)
        return cmd_report(cfg, out, args.experiment, args.compensation)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
