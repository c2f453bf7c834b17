"""Pressure extraction, error budget, theory comparison and electric/Casimir ratios.

Error model
-----------
Per point, the total standard deviation combines in quadrature

* the random standard error of the repeated measurements,
* a relative systematic term ``systematic_rel * P`` (calibration of C and R),
* an absolute instrumental floor ``systematic_abs``,
* the separation term ``|dP/da| * sigma_a``.

Only the random part fluctuates between synthetic repetitions; the systematic
terms describe uncertainty of an apparatus whose calibration is known exactly
in simulation. Intervals are quoted at 67% confidence with coverage factor 1.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import norm

from .core.constants import MV, NM
from .electrostatics import SpherePlateGeometry, electric_pressure_pfa, ElectricDrive
from .errors import ValidationError
from .lifshitz import PressureCurve, casimir_pressure_plates
from .simulate import DEFAULT_C, DEFAULT_NOISE_SIGMA, DEFAULT_SEPARATION_JITTER, v0_at

DEFAULT_CONFIDENCE = 0.67
DEFAULT_SIGMA_A = 0.5e-9
DEFAULT_SYSTEMATIC_REL = 0.0165
DEFAULT_SYSTEMATIC_ABS = 2.2e-3
DEFAULT_R = 60.8e-6
# single-shot pressure noise equivalent to the default frequency noise
DEFAULT_SHOT_PA = DEFAULT_NOISE_SIGMA / (DEFAULT_C * 2.0 * np.pi * DEFAULT_R)
DEFAULT_REPEATS = 11

COMPENSATION_ZERO = "zero"
COMPENSATION_MEAN = "mean"

_CURVE_HEADER = "a_nm,P_Pa,sigma_Pa"


def coverage_factor(confidence):
    """Multiplier ``k`` of one standard deviation for a two-sided interval.

    Levels within 5% of one standard deviation (67%, 68%, 68.27%) map to
    exactly ``k = 1``; other levels use the normal quantile.
    """
    if not 0 < confidence < 1:
        raise ValidationError(f"confidence must lie in (0, 1), got {confidence}")
    k = float(norm.ppf(0.5 * (1.0 + confidence)))
    return 1.0 if abs(k - 1.0) < 0.05 else k


def figure_grid():
    """Separations 235-350 nm in 1 nm steps, then 350-700 nm in 3 nm steps (m)."""
    return np.concatenate([np.arange(235, 350, 1.0), np.arange(350, 701, 3.0)]) * NM


@dataclass(frozen=True)
class ErrorBudget:
    """Inputs of the per-point error model (SI units).

    ``sigma_P_random`` (Pa) is used only for curves that carry no sigmas of
    their own.
    """

    sigma_a: float = DEFAULT_SIGMA_A
    sigma_P_random: Optional[float] = None
    confidence: float = DEFAULT_CONFIDENCE
    systematic_rel: float = DEFAULT_SYSTEMATIC_REL
    systematic_abs: float = DEFAULT_SYSTEMATIC_ABS

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise ValidationError("confidence must lie in (0, 1)")
        for name in ("sigma_a", "systematic_rel", "systematic_abs"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.sigma_P_random is not None and self.sigma_P_random < 0:
            raise ValidationError("sigma_P_random must be non-negative")

    @property
    def k(self):
        return coverage_factor(self.confidence)


def extract_pressure(dataset, calib, R=None, confidence=DEFAULT_CONFIDENCE):
    """Casimir pressure from repeated measurements at a fixed applied voltage.

    For each piezo position the residual electric term ``beta (V - V0)^2``,
    with ``beta`` and ``V0`` taken from the calibration sweeps, is removed
    from every record before averaging:

        gradient = -mean(dw + beta (V - V0)^2) / C,   P = gradient / (2 pi R)

    At the compensating voltage the correction is small; it makes the
    inversion exact for noiseless data. Sigmas are the standard error of the
    repeats times the coverage factor of ``confidence``.
    """
    if calib is None:
        raise ValidationError("a calibration result is required")
    R = calib.R if R is None else R
    if R is None or not R > 0:
        raise ValidationError("sphere radius R must be given (positive)")
    k = coverage_factor(confidence)
    z_cal = np.array([p.z_piezo for p in calib.points])
    zs, pres, sig = [], [], []
    for z, mask in dataset.groups():
        n = int(mask.sum())
        if n < 2:
            raise ValidationError(f"need at least 2 repeats per separation; z={z / NM:.3f} nm has {n}")
        if z < z_cal.min() - 1e-15 or z > z_cal.max() + 1e-15:
            raise ValidationError(f"z={z / NM:.3f} nm lies outside the calibrated range")
        v = dataset.voltage[mask]
        corrected = dataset.shift[mask] + calib.beta_at(z) * (v - calib.v0_at_z(z)) ** 2
        grad = -corrected / calib.C
        zs.append(z)
        pres.append(grad.mean())
        sig.append(k * grad.std(ddof=1) / np.sqrt(n))
    order = np.argsort(zs)
    scale = 1.0 / (2.0 * np.pi * R)
    return PressureCurve(
        calib.a0 + np.array(zs)[order],
        np.array(pres)[order] * scale,
        np.array(sig)[order] * scale,
        "experiment",
    )


def _random_sigmas(curve, budget):
    if curve.sigmas is not None:
        return curve.sigmas
    if budget.sigma_P_random is None:
        raise ValidationError("curve has no sigmas and the budget gives no sigma_P_random")
    return np.full(len(curve), budget.sigma_P_random)


def _slope(curve, slope_source):
    a = curve.separations
    if slope_source is not None:
        if hasattr(slope_source, "derivative"):
            return np.asarray(slope_source.derivative(a), dtype=float)
        return np.gradient(slope_source.pressures, slope_source.separations, edge_order=2)
    if len(curve) < 3:
        raise ValidationError("need at least 3 points for finite-difference slopes")
    if not curve.is_strictly_decreasing:
        raise ValidationError("curve must be strictly decreasing; supply a smooth slope source")
    return np.gradient(curve.pressures, a, edge_order=2)


def propagate_separation_error(curve, budget, slope_source=None):
    """Add the separation uncertainty: ``sigma^2 = sigma_P^2 + (dP/da sigma_a)^2``.

    ``dP/da`` comes from centred finite differences on the curve, or from
    ``slope_source`` (a `PressureCurve` on the same grid, or any object with
    a ``derivative(a)`` method such as `PressureInterpolant`) when the curve
    itself is noisy.
    """
    if len(curve) < 3:
        raise ValidationError("need at least 3 points for finite-difference slopes")
    sig = _random_sigmas(curve, budget)
    if budget.sigma_a == 0:
        return curve.with_sigmas(np.array(sig, dtype=float))
    slope = _slope(curve, slope_source)
    total = np.sqrt(sig**2 + (slope * budget.sigma_a) ** 2)
    return curve.with_sigmas(total)


def total_experimental_error(curve, budget, slope_source=None):
    """Full per-point error: `propagate_separation_error` plus the systematic terms.

    Budget entries are taken as already stated at the budget's confidence.
    """
    with_sep = propagate_separation_error(curve, budget, slope_source)
    sys = np.hypot(budget.systematic_rel * curve.pressures, budget.systematic_abs)
    return with_sep.with_sigmas(np.sqrt(with_sep.sigmas**2 + sys**2))


def check_same_grid(c1, c2):
    """Raise unless both curves share one separation grid."""
    if len(c1) != len(c2) or not np.allclose(c1.separations, c2.separations, rtol=1e-12, atol=0):
        raise ValidationError(
            f"separation grids differ ({c1.label or 'curve'} vs {c2.label or 'curve'}); resample explicitly"
        )


def pointwise_exclusion(c1, c2, k=1.0):
    """``|P1 - P2| > k sigma`` per point, with sigmas from whichever curve carries them."""
    check_same_grid(c1, c2)
    s = [c.sigmas for c in (c1, c2) if c.sigmas is not None]
    if not s:
        raise ValidationError("at least one curve must carry sigmas")
    sigma = np.sqrt(sum(x**2 for x in s))
    return np.abs(c1.pressures - c2.pressures) > k * sigma


def longest_run(flags, separations):
    """Separation interval ``(a_start, a_end)`` of the longest run of True, or None."""
    flags = np.asarray(flags, dtype=bool)
    best, best_len, start = None, 0, None
    for i, f in enumerate(np.append(flags, False)):
        if f and start is None:
            start = i
        elif not f and start is not None:
            if i - start > best_len:
                best_len, best = i - start, (float(separations[start]), float(separations[i - 1]))
            start = None
    return best


@dataclass(frozen=True, eq=False)
class RatioTable:
    """Electric pressure of the uncompensated residual potential vs Casimir pressure.

    ``percent`` is derived from the stored pressures.
    """

    separations: np.ndarray
    delta_v: np.ndarray
    electric: np.ndarray
    casimir: np.ndarray
    law: str = ""
    compensation: float = 0.0
    compensation_mode: str = COMPENSATION_ZERO

    @property
    def percent(self):
        return 100.0 * np.asarray(self.electric) / np.asarray(self.casimir)

    def rows(self):
        return [
            {
                "a_nm": float(a / NM),
                "delta_V_mV": float(dv / MV),
                "electric_Pa": float(e),
                "casimir_Pa": float(c),
                "percent": float(p),
            }
            for a, dv, e, c, p in zip(self.separations, self.delta_v, self.electric, self.casimir, self.percent)
        ]

    def to_dict(self):
        return {
            "law": self.law,
            "compensation_V": self.compensation,
            "compensation_mode": self.compensation_mode,
            "rows": self.rows(),
        }


def electric_to_casimir_ratio(
    a_list, v0_law, compensation=0.0, R=DEFAULT_R, model=None, settings=None,
    casimir=None, compensation_mode=None,
):
    """Ratio table with ``dV = V0(a) - compensation`` at each separation.

    ``casimir`` may supply the plate pressure as a callable of ``a``;
    otherwise it is computed from ``model``.
    """
    a = np.atleast_1d(np.asarray(a_list, dtype=float))
    dv = np.atleast_1d(v0_at(v0_law, a)) - compensation
    geom = SpherePlateGeometry(R, a)
    electric = np.atleast_1d(electric_pressure_pfa(geom, ElectricDrive(dv, 0.0)))
    if casimir is None:
        if model is None:
            raise ValidationError("a permittivity model or a Casimir pressure function is required")
        pc = casimir_pressure_plates(a, model, settings)
    else:
        pc = casimir(a)
    if compensation_mode is None:
        compensation_mode = COMPENSATION_ZERO if compensation == 0 else COMPENSATION_MEAN
    name = getattr(v0_law, "name", "") or (
        f"V0 = {v0_law.slope_mv_per_nm:g} mV/nm * a + {v0_law.intercept_mv:g} mV"
    )
    return RatioTable(a, dv, electric, np.atleast_1d(np.asarray(pc, dtype=float)), name,
                      float(compensation), compensation_mode)


def _curve_dict(c):
    return {
        "label": c.label,
        "a_nm": (c.separations / NM).tolist(),
        "P_Pa": c.pressures.tolist(),
        "sigma_Pa": None if c.sigmas is None else c.sigmas.tolist(),
    }


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Pointwise comparison of an experimental curve with both theories."""

    experiment: PressureCurve
    theory_drude: PressureCurve
    theory_plasma: PressureCurve
    confidence: float
    drude_excluded: np.ndarray
    plasma_excluded: np.ndarray
    ratio_tables: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def k(self):
        return coverage_factor(self.confidence)

    @property
    def drude_band(self):
        return longest_run(self.drude_excluded, self.experiment.separations)

    @property
    def plasma_band(self):
        return longest_run(self.plasma_excluded, self.experiment.separations)

    @property
    def plasma_consistent_fraction(self):
        return float(np.mean(~self.plasma_excluded))

    @property
    def drude_consistent_fraction(self):
        return float(np.mean(~self.drude_excluded))

    def verdicts(self):
        def word(x):
            return ["excluded" if e else "consistent" for e in x]

        return {"drude": word(self.drude_excluded), "plasma": word(self.plasma_excluded)}

    def to_dict(self):
        def band(b):
            return None if b is None else [b[0] / NM, b[1] / NM]

        return {
            "confidence": self.confidence,
            "coverage_factor": self.k,
            "experiment": _curve_dict(self.experiment),
            "theory_drude": _curve_dict(self.theory_drude),
            "theory_plasma": _curve_dict(self.theory_plasma),
            "verdicts": self.verdicts(),
            "exclusion_band_nm": {"drude": band(self.drude_band), "plasma": band(self.plasma_band)},
            "consistent_fraction": {
                "drude": self.drude_consistent_fraction,
                "plasma": self.plasma_consistent_fraction,
            },
            "ratio_tables": [t.to_dict() for t in self.ratio_tables],
            "metadata": self.metadata,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def summary(self):
        lines = [f"confidence {self.confidence:g} (k = {self.k:g}), {len(self.experiment)} separations"]
        for name, b, frac in (
            ("Drude", self.drude_band, self.drude_consistent_fraction),
            ("plasma", self.plasma_band, self.plasma_consistent_fraction),
        ):
            where = "none" if b is None else f"{b[0] / NM:.0f}-{b[1] / NM:.0f} nm"
            lines.append(f"{name}: consistent at {100 * frac:.1f}% of points; exclusion band {where}")
        for t in self.ratio_tables:
            lines.append(
                f"electric/Casimir ratio, law {t.law!r}, compensation {t.compensation / MV:g} mV "
                f"({t.compensation_mode}):"
            )
            for r in t.rows():
                lines.append(f"  a = {r['a_nm']:6.0f} nm   dV = {r['delta_V_mV']:8.3f} mV   {r['percent']:8.2f} %")
        return "\n".join(lines)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.to_json(out / "report.json")
        # distinct names so the report never overwrites its own inputs
        write_curve_csv(self.experiment, out / "report_experiment.csv")
        write_curve_csv(self.theory_drude, out / "report_theory_drude.csv")
        write_curve_csv(self.theory_plasma, out / "report_theory_plasma.csv")
        return out


def compare_with_theory(experiment, drude, plasma, confidence=DEFAULT_CONFIDENCE, ratio_tables=(), metadata=None):
    """Build a `ComparisonReport`; grids must coincide exactly."""
    if len(experiment) == 0:
        raise ValidationError("experiment curve is empty")
    if experiment.sigmas is None:
        raise ValidationError("experiment curve carries no sigmas")
    k = coverage_factor(confidence)
    d_ex = pointwise_exclusion(experiment, drude, k)
    p_ex = pointwise_exclusion(experiment, plasma, k)
    return ComparisonReport(experiment, drude, plasma, confidence, d_ex, p_ex, list(ratio_tables), dict(metadata or {}))


def synthesize_experiment(
    theory, separations, budget=None, seed=0, repeats=DEFAULT_REPEATS,
    separation_jitter=DEFAULT_SEPARATION_JITTER, shot_sigma=DEFAULT_SHOT_PA, draw_systematic=False,
):
    """Synthetic mean pressures around ``theory`` with the default error model.

    ``theory`` is a callable ``P(a)`` with a ``derivative`` method (e.g. a
    `PressureInterpolant`). Each point averages ``repeats`` draws of
    ``P(a + jitter) + shot noise``; sigmas follow `total_experimental_error`.
    With ``draw_systematic`` a common relative offset is also drawn.
    """
    budget = ErrorBudget() if budget is None else budget
    rng = np.random.default_rng(seed)
    a = np.asarray(separations, dtype=float)
    shots = a[:, None] + separation_jitter * rng.standard_normal((a.size, repeats))
    draws = theory(shots) + shot_sigma * rng.standard_normal((a.size, repeats))
    if draw_systematic:
        draws = draws * (1.0 + budget.systematic_rel * rng.standard_normal())
    mean = draws.mean(axis=1)
    stderr = budget.k * draws.std(axis=1, ddof=1) / np.sqrt(repeats)
    curve = PressureCurve(a, mean, stderr, "synthetic-experiment")
    return total_experimental_error(curve, budget, theory)


def write_curve_csv(curve, path=None, header=None):
    """Plot-ready ``a_nm,P_Pa,sigma_Pa`` CSV; ``header`` entries become ``#key=value`` lines."""
    lines = [f"#label={curve.label}"]
    for key, value in (header or {}).items():
        lines.append(f"#{key}={value}")
    lines.append(_CURVE_HEADER)
    sig = curve.sigmas if curve.sigmas is not None else [None] * len(curve)
    for a, p, s in zip(curve.separations, curve.pressures, sig):
        lines.append(f"{float(a) / NM!r},{float(p)!r},{'' if s is None else repr(float(s))}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_curve_csv(source):
    """Inverse of `write_curve_csv`; returns a `PressureCurve` (sigmas None if the column is empty)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    label, rows, header_seen = "", [], False
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            key, _, value = s[1:].partition("=")
            if key.strip() == "label":
                label = value.strip()
            continue
        if not header_seen:
            if s.replace(" ", "") != _CURVE_HEADER:
                raise ValidationError(f"line {lineno}: expected header {_CURVE_HEADER!r}")
            header_seen = True
            continue
        parts = s.split(",")
        if len(parts) != 3:
            raise ValidationError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        try:
            rows.append((float(parts[0]) * NM, float(parts[1]), float(parts[2]) if parts[2] else None))
        except ValueError:
            raise ValidationError(f"line {lineno}: cannot parse {s!r}") from None
    if not header_seen:
        raise ValidationError("curve file has no header line")
    if not rows:
        return PressureCurve(np.empty(0), np.empty(0), None, label)
    a = np.array([r[0] for r in rows])
    p = np.array([r[1] for r in rows])
    sig = [r[2] for r in rows]
    if all(x is None for x in sig):
        sigmas = None
    elif any(x is None for x in sig):
        raise ValidationError("sigma column is only partly filled")
    else:
        sigmas = np.array(sig)
    return PressureCurve(a, p, sigmas, label)
