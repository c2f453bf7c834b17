"""Synthetic dynamic-AFM frequency-shift data.

The noiseless signal at absolute separation ``a`` and applied voltage ``V`` is

    dw = -C * beta_geometric(a, R) * (V - V0(a))**2 - C * 2 pi R * P_casimir(a)

Records are acquired sweep by sweep (one sweep per piezo position ``z``,
``a = a0 + z``). Each record carries a global acquisition index; drift is
``drift_rate * index``. With anchors enabled every sweep re-measures its first
voltage at the end, which is what `subtract_drift` uses to infer the drift.
"""
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core.constants import MV, NM
from .electrostatics import SpherePlateGeometry, beta_geometric
from .errors import ValidationError
from .lifshitz import PressureInterpolant, casimir_pressure_plates

PROTOCOL_VOLTAGE_COUNT = 11
PIEZO_TRAVEL = 2.3e-6
RNG_ALGORITHM = "numpy.random.Generator(PCG64)"
OVERRIDE_FLAG = "allow_nonstandard_voltage_count"

# defaults sized for ~2% total pressure error at 235 nm (see analysis.ErrorBudget)
DEFAULT_C = 1.0e4
DEFAULT_NOISE_SIGMA = 1.4e-3
DEFAULT_SEPARATION_JITTER = 0.3e-9


@dataclass(frozen=True)
class V0Law:
    """Residual potential ``V0(a) = slope * a[nm] + intercept`` in mV."""

    slope_mv_per_nm: float
    intercept_mv: float
    name: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.slope_mv_per_nm) and np.isfinite(self.intercept_mv)):
            raise ValidationError("V0 law coefficients must be finite")

    def __call__(self, a):
        return v0_at(self, a)

    def shifted(self, delta_v):
        """Law with the intercept moved by ``delta_v`` volts."""
        return replace(self, intercept_mv=self.intercept_mv + delta_v / MV)


# linear V0(a) laws for the three surface states plus the constant uncleaned mean
UNCLEANED = V0Law(2.60e-3, 31.95, "uncleaned")
CLEANED = V0Law(1.07e-3, 0.928, "cleaned")
CLEANED_TWICE = V0Law(0.917e-3, -5.80, "cleaned-twice")
UNCLEANED_MEAN = V0Law(0.0, 33.16, "uncleaned-mean")


def v0_at(law, a):
    """Residual potential in volts at separation ``a`` (m)."""
    a = np.asarray(a, dtype=float)
    out = (law.slope_mv_per_nm * (a / NM) + law.intercept_mv) * MV
    return out if out.ndim else float(out)


def default_voltages(v0_guess, half_span=0.150, count=PROTOCOL_VOLTAGE_COUNT):
    """``count`` voltages spread uniformly over ``v0_guess +- half_span`` (V)."""
    return np.linspace(v0_guess - half_span, v0_guess + half_span, count)


def default_z_grid(a0=235e-9, a_min=235e-9, a_max=700e-9, step=1e-9):
    """Piezo positions giving absolute separations ``a_min..a_max``."""
    n = int(round((a_max - a_min) / step)) + 1
    return a_min - a0 + step * np.arange(n)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a synthetic experiment (SI units throughout).

    ``C`` is the calibration constant ``omega0 / (2 k)``; its default is a
    placeholder recovered by calibration, not a measured property.
    """

    R: float = 60.8e-6
    a0: float = 235e-9
    C: float = DEFAULT_C
    v0_law: V0Law = CLEANED_TWICE
    voltages: Optional[Sequence[float]] = None
    z_grid: Optional[Sequence[float]] = None
    noise_sigma: float = 0.0
    separation_jitter: float = 0.0
    drift_rate: float = 0.0
    seed: int = 0
    anchors: bool = True
    include_casimir: bool = True
    allow_nonstandard_voltage_count: bool = False

    def __post_init__(self):
        z = default_z_grid(self.a0) if self.z_grid is None else self.z_grid
        z = np.atleast_1d(np.asarray(z, dtype=float))
        object.__setattr__(self, "z_grid", z)
        if self.voltages is None:
            a_mid = self.a0 + 0.5 * (z.min() + z.max())
            volts = default_voltages(v0_at(self.v0_law, a_mid))
        else:
            volts = np.asarray(self.voltages, dtype=float)
        object.__setattr__(self, "voltages", volts)
        self.validate()

    def validate(self):
        if not self.R > 0:
            raise ValidationError("sphere radius R must be positive")
        if not self.a0 > 0:
            raise ValidationError("closest separation a0 must be positive")
        if not self.C > 0:
            raise ValidationError("calibration constant C must be positive")
        v = self.voltages
        if v.size != PROTOCOL_VOLTAGE_COUNT and not self.allow_nonstandard_voltage_count:
            raise ValidationError(
                f"the measurement protocol uses exactly {PROTOCOL_VOLTAGE_COUNT} applied voltages, "
                f"got {v.size}; set {OVERRIDE_FLAG} = true to override"
            )
        if v.size < 3:
            raise ValidationError("at least 3 applied voltages are required")
        if np.any(np.diff(v) <= 0):
            raise ValidationError("applied voltages must be strictly increasing")
        z = self.z_grid
        if np.any(z < 0) or np.any(z > PIEZO_TRAVEL):
            raise ValidationError(
                f"piezo displacements must lie within [0, {PIEZO_TRAVEL}] m (actuator travel)"
            )
        v0 = v0_at(self.v0_law, self.a0 + z)
        if np.any(v0 <= v[0]) or np.any(v0 >= v[-1]):
            raise ValidationError("applied voltages must bracket V0(a) at every separation")
        for name in ("noise_sigma", "separation_jitter"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    @property
    def separations(self):
        return self.a0 + self.z_grid

    def echo(self):
        """Flat dictionary of the configuration for metadata blocks."""
        return {
            "R_m": self.R,
            "C": self.C,
            "voltages_V": [float(v) for v in self.voltages],
            "z_min_m": float(self.z_grid.min()),
            "z_max_m": float(self.z_grid.max()),
            "z_count": int(self.z_grid.size),
            "noise_sigma_rad_s": self.noise_sigma,
            "separation_jitter_m": self.separation_jitter,
            "seed": self.seed,
            "anchors": self.anchors,
            "include_casimir": self.include_casimir,
        }

    def truth(self):
        return {
            "a0_m": self.a0,
            "C": self.C,
            "v0_slope_mV_per_nm": self.v0_law.slope_mv_per_nm,
            "v0_intercept_mV": self.v0_law.intercept_mv,
            "drift_rate_rad_s": self.drift_rate,
        }


_CSV_HEADER = "z_piezo_nm,applied_voltage_mV,frequency_shift_rad_s,sweep_index"


@dataclass(frozen=True, eq=False)
class SweepDataset:
    """Frequency-shift records ``(z, V, dw, index)`` in SI units plus metadata.

    ``index`` is the global acquisition counter used by the drift model.
    """

    z: np.ndarray
    voltage: np.ndarray
    shift: np.ndarray
    index: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = [np.asarray(x) for x in (self.z, self.voltage, self.shift, self.index)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValidationError("sweep record columns must be 1-D and of equal length")
        object.__setattr__(self, "z", arrays[0].astype(float))
        object.__setattr__(self, "voltage", arrays[1].astype(float))
        object.__setattr__(self, "shift", arrays[2].astype(float))
        object.__setattr__(self, "index", arrays[3].astype(np.int64))
        if np.any(self.z < 0):
            raise ValidationError("piezo displacements must be non-negative")

    def __len__(self):
        return self.z.size

    def z_values(self):
        """Distinct piezo positions in acquisition order."""
        _, first = np.unique(self.z, return_index=True)
        return self.z[np.sort(first)]

    def groups(self):
        """Yield ``(z, mask)`` per sweep in acquisition order."""
        for z in self.z_values():
            yield z, self.z == z

    def with_shift(self, shift, **meta):
        md = dict(self.metadata)
        md.update(meta)
        return SweepDataset(self.z, self.voltage, shift, self.index, md)

    def checksum(self):
        h = hashlib.sha256()
        for arr in (self.z, self.voltage, self.shift, self.index):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    # --- CSV ---------------------------------------------------------------
    def to_csv(self, path=None):
        lines = []
        for key, value in self.metadata.items():
            lines.append(f"#{key}={json.dumps(value)}")
        lines.append(_CSV_HEADER)
        for z, v, s, i in zip(self.z, self.voltage, self.shift, self.index):
            lines.append(f"{float(z) / NM!r},{float(v) / MV!r},{float(s)!r},{int(i)}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, source):
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text(encoding="utf-8")
        else:
            text = source
        meta = {}
        rows = []
        header_seen = False
        for lineno, line in enumerate(io.StringIO(text), start=1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                key, sep, value = s[1:].partition("=")
                if sep:
                    try:
                        meta[key.strip()] = json.loads(value)
                    except json.JSONDecodeError:
                        meta[key.strip()] = value.strip()
                continue
            if not header_seen:
                if s.replace(" ", "") != _CSV_HEADER:
                    raise ValidationError(f"line {lineno}: expected header {_CSV_HEADER!r}")
                header_seen = True
                continue
            parts = s.split(",")
            if len(parts) != 4:
                raise ValidationError(f"line {lineno}: expected 4 fields, got {len(parts)}")
            try:
                rows.append((float(parts[0]) * NM, float(parts[1]) * MV, float(parts[2]), int(parts[3])))
            except ValueError:
                raise ValidationError(f"line {lineno}: cannot parse record {s!r}") from None
        if not header_seen:
            raise ValidationError("sweep file has no header line")
        if not rows:
            raise ValidationError("sweep file contains no records")
        z, v, w, i = (np.array(c) for c in zip(*rows))
        return cls(z, v, w, i, meta)


# --- forward model ---------------------------------------------------------
def _casimir_function(config, model, settings, casimir, a_values):
    """Callable returning the Casimir pressure, or None when disabled."""
    if not config.include_casimir:
        return None
    if casimir is not None:
        return casimir
    if model is None:
        raise ValidationError("a permittivity model is required when include_casimir is set")
    a_values = np.asarray(a_values, dtype=float)
    lo, hi = a_values.min(), a_values.max()
    if a_values.size <= 8 and config.separation_jitter == 0:
        cache = dict(zip(a_values.tolist(), np.atleast_1d(casimir_pressure_plates(a_values, model, settings))))
        return lambda a: np.vectorize(cache.__getitem__)(np.asarray(a, dtype=float))
    pad = 10 * config.separation_jitter + 1e-9
    return PressureInterpolant.from_model(model, settings, lo - pad, hi + pad, nodes=31)


def _shift(a, V, config, casimir_fn):
    geom = SpherePlateGeometry(config.R, a)
    electric = config.C * beta_geometric(geom) * (V - v0_at(config.v0_law, a)) ** 2
    if casimir_fn is None:
        return -electric
    return -electric - config.C * 2.0 * np.pi * config.R * casimir_fn(a)


def frequency_shift_model(a, V, config, model=None, settings=None, casimir=None):
    """Noiseless frequency shift (rad/s) at separation ``a`` and voltage ``V``.

    ``casimir`` optionally supplies the plate pressure as a callable of ``a``
    (e.g. a `PressureInterpolant`); otherwise it is computed from ``model``.
    """
    a_arr = np.asarray(a, dtype=float)
    fn = _casimir_function(config, model, settings, casimir, np.atleast_1d(a_arr))
    out = _shift(a_arr, np.asarray(V, dtype=float), config, fn)
    return out if np.ndim(out) else float(out)


def _acquisition_plan(config, voltages_per_sweep):
    z_rec, v_rec = [], []
    for z in config.z_grid:
        for v in voltages_per_sweep:
            z_rec.append(z)
            v_rec.append(v)
    return np.array(z_rec), np.array(v_rec)


def _emit(config, z_rec, v_rec, model, settings, casimir, kind):
    rng = np.random.default_rng(config.seed)
    a_rec = config.a0 + z_rec
    if config.separation_jitter > 0:
        a_rec = a_rec + config.separation_jitter * rng.standard_normal(a_rec.size)
    fn = _casimir_function(config, model, settings, casimir, a_rec)
    shift = _shift(a_rec, v_rec, config, fn)
    index = np.arange(z_rec.size)
    if config.noise_sigma > 0:
        shift = shift + config.noise_sigma * rng.standard_normal(shift.size)
    shift = shift + config.drift_rate * index
    meta = {
        "kind": kind,
        "rng": RNG_ALGORITHM,
        "config": config.echo(),
        "truth": config.truth(),
    }
    return SweepDataset(z_rec, v_rec, shift, index, meta)


def generate_sweeps(config, model=None, settings=None, casimir=None):
    """Voltage sweeps at every piezo position.

    Each sweep applies the configured voltages in order and, with anchors
    enabled, repeats the first voltage at the end. Gaussian noise of
    ``noise_sigma`` and separation jitter are drawn from a PCG64 generator
    seeded with ``config.seed``; the same seed gives bit-identical output.
    """
    per_sweep = list(config.voltages) + ([config.voltages[0]] if config.anchors else [])
    z_rec, v_rec = _acquisition_plan(config, per_sweep)
    return _emit(config, z_rec, v_rec, model, settings, casimir, "calibration-sweeps")


def generate_compensated(config, applied_voltage, repeats=11, model=None, settings=None, casimir=None):
    """Repeated measurements at one fixed voltage per piezo position."""
    if repeats < 2:
        raise ValidationError("at least two repeats per separation are required")
    z_rec, v_rec = _acquisition_plan(config, [applied_voltage] * repeats)
    ds = _emit(config, z_rec, v_rec, model, settings, casimir, "compensated")
    ds.metadata["applied_voltage_V"] = float(applied_voltage)
    ds.metadata["repeats"] = int(repeats)
    return ds


def subtract_drift(dataset):
    """Remove a drift linear in acquisition index, inferred from repeated voltages.

    Within each sweep every record at the sweep's first voltage is an anchor.
    A common slope with per-sweep offsets is fitted to the anchors by least
    squares, and ``slope * index`` is subtracted from every record. The
    estimate and its standard error are stored in the metadata.
    """
    xs, ys = [], []
    for _, mask in dataset.groups():
        v = dataset.voltage[mask]
        anchor = v == v[0]
        if anchor.sum() < 2:
            raise ValidationError(
                "sweep has no repeated anchor measurement; regenerate the data with anchors enabled"
            )
        idx = dataset.index[mask][anchor].astype(float)
        w = dataset.shift[mask][anchor]
        xs.append(idx - idx.mean())
        ys.append(w - w.mean())
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    sxx = float(x @ x)
    if sxx == 0:
        raise ValidationError("anchor measurements do not span any acquisition interval")
    rate = float(x @ y) / sxx
    dof = x.size - len(xs) - 1
    if dof > 0:
        resid = y - rate * x
        stderr = float(np.sqrt((resid @ resid) / dof / sxx))
    else:
        stderr = float("nan")
    corrected = dataset.shift - rate * dataset.index
    return dataset.with_shift(
        corrected, drift_rate_estimate=rate, drift_rate_stderr=stderr, drift_subtracted=True
    )


def config_to_dict(config):
    d = asdict(config)
    d["voltages"] = [float(v) for v in config.voltages]
    d["z_grid"] = [float(z) for z in config.z_grid]
    d["v0_law"] = asdict(config.v0_law)
    return d
