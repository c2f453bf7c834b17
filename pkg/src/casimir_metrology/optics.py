"""Tabulated optical data and the dielectric permittivity at imaginary frequencies.

The permittivity along the imaginary axis follows from the Kramers-Kronig
relation

    eps(i xi) = 1 + (2/pi) * int_0^inf  omega * Im eps(omega) / (omega**2 + xi**2) d omega

with ``Im eps = 2 n k`` inside the tabulated range, a Drude form below it and
zero above it. The generalized plasma variant replaces the conduction-electron
part by the lossless term ``omega_p**2 / xi**2`` and keeps only the interband
(core) remainder of the tabulated data in the integral.
"""
import csv
import io
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core.constants import EV, HBAR, K_B
from .core.quadrature import integrate_interval
from .errors import ValidationError

DRUDE = "drude"
PLASMA = "plasma"
VARIANTS = (DRUDE, PLASMA)

MIN_ROWS = 50
MIN_DECADES = 3.0
KK_REL_TOL = 1e-10
_XI_CHUNK = 128


@dataclass(frozen=True, eq=False)
class OpticalTable:
    """Complex refractive index ``n + i k`` tabulated against photon energy (eV)."""

    energy_ev: np.ndarray
    n: np.ndarray
    k: np.ndarray
    material: str = ""
    source: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.energy_ev, dtype=float)
        n = np.asarray(self.n, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if not (e.ndim == n.ndim == k.ndim == 1) or not (e.size == n.size == k.size):
            raise ValidationError("energy, n and k must be 1-D arrays of equal length")
        if e.size < 2:
            raise ValidationError("optical table needs at least two rows")
        if np.any(~(e > 0)):
            raise ValidationError("photon energies must be positive")
        diffs = np.diff(e)
        if np.any(diffs == 0):
            dup = e[1:][diffs == 0][0]
            raise ValidationError(f"duplicate photon energy {dup!r} eV in optical table")
        if np.any(diffs < 0):
            raise ValidationError("photon energies must be strictly increasing")
        if np.any(~(n > 0)):
            raise ValidationError("refractive index n must be positive")
        if np.any(~(k >= 0)):
            raise ValidationError("extinction coefficient k must be non-negative")
        object.__setattr__(self, "energy_ev", e)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)

    def __len__(self):
        return self.energy_ev.size

    @property
    def omega(self):
        """Tabulated angular frequencies, rad/s."""
        return self.energy_ev * EV

    @property
    def im_eps_nodes(self):
        return 2.0 * self.n * self.k

    @property
    def decades(self):
        return float(np.log10(self.energy_ev[-1] / self.energy_ev[0]))

    def check_coverage(self):
        """Raise unless the table is dense and wide enough for Kramers-Kronig use."""
        if len(self) < MIN_ROWS:
            raise ValidationError(
                f"optical table has {len(self)} rows; at least {MIN_ROWS} are required"
            )
        if self.decades < MIN_DECADES:
            raise ValidationError(
                f"optical table spans {self.decades:.2f} decades of energy; "
                f"at least {MIN_DECADES:g} are required"
            )


def load_optical_table(source, fmt="csv"):
    """Read an optical table from a path, text, bytes or a file-like object.

    The CSV has header ``energy_eV,n,k``. Lines starting with ``#`` carry
    metadata as ``# key=value`` (``material`` and ``source`` are recognised).
    """
    if fmt != "csv":
        raise ValidationError(f"unsupported optical table format {fmt!r}")
    if isinstance(source, (str, Path)) and not (isinstance(source, str) and "\n" in source):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    meta = {}
    rows = []
    header_seen = False
    for lineno, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key.strip()] = value.strip()
            continue
        fields = next(csv.reader([stripped]))
        if not header_seen:
            if [f.strip() for f in fields] != ["energy_eV", "n", "k"]:
                raise ValidationError(
                    f"line {lineno}: expected header 'energy_eV,n,k', got {stripped!r}"
                )
            header_seen = True
            continue
        if len(fields) != 3:
            raise ValidationError(f"line {lineno}: expected 3 fields, got {len(fields)}")
        try:
            rows.append(tuple(float(f) for f in fields))
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: cannot parse {stripped!r} ({exc})") from None
    if not header_seen:
        raise ValidationError("optical table has no 'energy_eV,n,k' header")
    if not rows:
        raise ValidationError("optical table has no data rows")
    arr = np.array(rows)
    return OpticalTable(
        arr[:, 0],
        arr[:, 1],
        arr[:, 2],
        material=meta.get("material", ""),
        source=meta.get("source", ""),
        metadata=meta,
    )


def write_optical_table(table, path, comments=()):
    lines = [f"# {c}" for c in comments]
    if table.material:
        lines.append(f"# material={table.material}")
    if table.source:
        lines.append(f"# source={table.source}")
    lines.append("energy_eV,n,k")
    lines += [f"{float(e)!r},{float(n)!r},{float(k)!r}" for e, n, k in zip(table.energy_ev, table.n, table.k)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _interp_im_eps(table, omega):
    """Piecewise log-log interpolation of ``2 n k``; linear in log(omega) next to zeros."""
    nodes_w = table.omega
    nodes_v = table.im_eps_nodes
    lw = np.log(nodes_w)
    x = np.log(omega)
    idx = np.clip(np.searchsorted(lw, x, side="right") - 1, 0, lw.size - 2)
    x0, x1 = lw[idx], lw[idx + 1]
    v0, v1 = nodes_v[idx], nodes_v[idx + 1]
    frac = (x - x0) / (x1 - x0)
    positive = (v0 > 0) & (v1 > 0)
    lv0 = np.log(np.where(positive, v0, 1.0))
    lv1 = np.log(np.where(positive, v1, 1.0))
    loglog = np.exp(lv0 + frac * (lv1 - lv0))
    linear = v0 + frac * (v1 - v0)
    out = np.where(positive, loglog, linear)
    # exact node values
    at_right = frac == 1.0
    return np.where(at_right, v1, np.where(frac == 0.0, v0, out))


def im_eps(table, omega):
    """Imaginary part of the permittivity, ``2 n k``, at angular frequency ``omega``.

    Interpolates log-log between rows. Frequencies outside the tabulated range
    raise: extrapolation is left to the caller.
    """
    omega = np.asarray(omega, dtype=float)
    lo, hi = table.omega[0], table.omega[-1]
    # allow for the rounding of E*EV when a node frequency is passed back in
    if np.any(omega < lo * (1 - 1e-14)) or np.any(omega > hi * (1 + 1e-14)):
        raise ValidationError(
            f"frequency outside tabulated range [{lo:.6e}, {hi:.6e}] rad/s"
        )
    out = _interp_im_eps(table, np.clip(omega, lo, hi))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DrudeParameters:
    """Plasma frequency and relaxation parameter, both in eV."""

    plasma_frequency_ev: float = 9.0
    gamma_ev: float = 0.035

    def __post_init__(self):
        if not self.plasma_frequency_ev > 0:
            raise ValidationError("plasma frequency must be positive")
        if not self.gamma_ev >= 0:
            raise ValidationError("relaxation parameter must be non-negative")

    @property
    def omega_p(self):
        return self.plasma_frequency_ev * EV

    @property
    def gamma(self):
        return self.gamma_ev * EV

    def im_eps(self, omega):
        """``omega_p**2 gamma / (omega (omega**2 + gamma**2))``."""
        wp, g = self.omega_p, self.gamma
        return wp * wp * g / (omega * (omega * omega + g * g))

    def eps_imag_axis(self, xi):
        """Closed-form Drude ``1 + omega_p**2 / (xi (xi + gamma))``."""
        return 1.0 + self.omega_p**2 / (xi * (xi + self.gamma))


class PermittivityModel:
    """Dielectric function on the imaginary axis built from an optical table.

    Parameters
    ----------
    variant : {"drude", "plasma"}
        ``"drude"``: Drude-extrapolated optical data. ``"plasma"``: generalized
        plasma model (lossless conduction term plus interband core).
    table : OpticalTable
    drude : DrudeParameters

    Evaluated values are memoised per frequency; the memo is guarded by a
    lock and safe to share between threads.
    """

    def __init__(self, variant, table, drude=None, check_coverage=True):
        if variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")
        if check_coverage:
            table.check_coverage()
        self.variant = variant
        self.table = table
        self.drude = drude if drude is not None else DrudeParameters()
        w_min = table.omega[0]
        d_min = self.drude.im_eps(w_min)
        tab_min = table.im_eps_nodes[0]
        # scale so the low-frequency Drude tail joins the table continuously
        self.low_join_scale = tab_min / d_min if d_min > 0 else 0.0
        self._cache = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return (
            f"PermittivityModel(variant={self.variant!r}, material={self.table.material!r}, "
            f"omega_p={self.drude.plasma_frequency_ev} eV, gamma={self.drude.gamma_ev} eV)"
        )

    def with_variant(self, variant):
        return PermittivityModel(variant, self.table, self.drude, check_coverage=False)

    # integrand pieces -------------------------------------------------
    def _absorption(self, omega):
        """Im eps entering the dispersion integral on ``(0, omega_max]``."""
        table = self.table
        w_min = table.omega[0]
        inside = omega >= w_min
        w_in = np.clip(omega, w_min, table.omega[-1])
        tab = _interp_im_eps(table, w_in)
        w_safe = np.where(omega > 0, omega, w_min)
        if self.variant == DRUDE:
            low = self.low_join_scale * self.drude.im_eps(w_safe)
            return np.where(inside, tab, low)
        # below the table the extrapolation is pure Drude: no interband core there
        core = np.maximum(0.0, tab - self.drude.im_eps(w_in))
        return np.where(inside, core, 0.0)

    def _kk_integral(self, xi, rel_tol):
        xi = np.asarray(xi, dtype=float)
        table = self.table
        w_max = table.omega[-1]
        out = np.empty(xi.size)
        for start in range(0, xi.size, _XI_CHUNK):
            chunk = xi[start : start + _XI_CHUNK]

            def integrand(w):
                absorb = self._absorption(w)
                if self.variant == DRUDE:
                    # omega * Im eps, finite at omega -> 0
                    g = self.drude.gamma
                    wp2g = self.drude.omega_p**2 * g * self.low_join_scale
                    low = wp2g / (w * w + g * g)
                    num = np.where(w < table.omega[0], low, w * absorb)
                else:
                    num = w * absorb
                return num[None, :] / (w[None, :] ** 2 + chunk[:, None] ** 2)

            out[start : start + chunk.size] = integrate_interval(
                integrand,
                0.0,
                w_max,
                rel_tol=rel_tol,
                # eps >= 1, so an absolute floor of rel_tol is a relative bound on eps
                abs_tol=rel_tol * np.pi / 2.0,
                breakpoints=table.omega,
            ).reshape(-1)
        return 2.0 / np.pi * out

    def eps(self, xi, rel_tol=KK_REL_TOL):
        """``eps(i xi)`` for ``xi > 0`` in rad/s; scalar or array."""
        xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
        if np.any(~(xi_arr > 0)):
            raise ValidationError("imaginary frequency xi must be positive")
        key_tol = float(rel_tol)
        result = np.empty(xi_arr.size)
        with self._lock:
            cached = [self._cache.get((float(x), key_tol)) for x in xi_arr]
        missing = [i for i, v in enumerate(cached) if v is None]
        if missing:
            vals = self._kk_integral(xi_arr[missing], rel_tol)
            with self._lock:
                for i, v in zip(missing, vals):
                    self._cache[(float(xi_arr[i]), key_tol)] = v
            for i, v in zip(missing, vals):
                cached[i] = v
        result[:] = cached
        result += 1.0
        if self.variant == PLASMA:
            result += self.drude.omega_p**2 / xi_arr**2
        return result if np.ndim(xi) else float(result[0])


def eps_imag_axis(model, xi, rel_tol=KK_REL_TOL):
    """Dielectric permittivity of ``model`` at imaginary frequency ``xi`` (rad/s)."""
    return model.eps(xi, rel_tol)


def matsubara_grid(T, l_max):
    """Matsubara frequencies ``2 pi k_B T l / hbar`` for ``l = 0..l_max`` (rad/s)."""
    if not T > 0:
        raise ValidationError("temperature must be positive")
    if l_max < 1:
        raise ValidationError("l_max must be at least 1")
    return 2.0 * np.pi * K_B * T / HBAR * np.arange(l_max + 1)


def drude_table(drude, e_min_ev, e_max_ev, rows, material="Drude metal"):
    """Synthetic table of ``n, k`` from the Drude dielectric function."""
    e = np.geomspace(e_min_ev, e_max_ev, rows)
    w = e * EV
    eps = 1.0 - drude.omega_p**2 / (w * (w + 1j * drude.gamma))
    nk = np.sqrt(eps)
    return OpticalTable(e, nk.real, np.abs(nk.imag), material=material, source="Drude model")
