"""Calibration chain: parabola fits per separation, then ``(a0, C)``, then the V0 line.

Each voltage sweep at piezo position ``z`` is fitted with a parabola whose
vertex gives ``V0(z)`` and whose curvature gives ``beta(z)``. The curvatures
are fitted to ``C * beta_geometric(a0 + z, R)`` to obtain the closest
separation ``a0`` and the calibration constant ``C``. Finally ``V0`` is fitted
by a straight line in absolute separation.
"""
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .core.constants import MV, NM
from .core.fitting import FitResult, fit_linear_least_squares, fit_nonlinear_least_squares
from .electrostatics import SpherePlateGeometry, beta_geometric
from .errors import FitError, ValidationError

MIN_VOLTAGES = 5
MIN_POINTS = 10
MIN_SPAN = 200e-9
A0_GUESS = 200e-9
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ParabolaFitPoint:
    """Vertex and curvature of one sweep.

    ``beta`` is in rad/(s V^2); ``casimir_shift`` is the vertex value of the
    frequency shift (rad/s), i.e. ``-C dF_C/da``.
    """

    z_piezo: float
    V0: float
    V0_sigma: float
    beta: float
    beta_sigma: float
    casimir_shift: float
    casimir_shift_sigma: float
    chi2: float
    dof: int

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else float("nan")


def fit_sweep_parabola(voltage, shift, sigma=None, z_piezo=0.0):
    """Least-squares parabola ``dw = A V^2 + B V + D`` through one sweep.

    Parameters
    ----------
    voltage, shift : array_like
        Applied voltages (V) and drift-corrected frequency shifts (rad/s).
    sigma : array_like, optional
        Per-record standard deviations. Without them the weights are uniform
        and the covariance is scaled by the reduced chi-square.
    z_piezo : float
        Position label stored in the result.

    Returns
    -------
    ParabolaFitPoint
        ``V0 = -B/(2A)``, ``beta = -A`` and ``casimir_shift = D - A V0^2``,
        with uncertainties from the delta method. Uncertainties are floored
        at machine precision of the value so they stay positive on exact data.
    """
    v = np.asarray(voltage, dtype=float)
    w_obs = np.asarray(shift, dtype=float)
    if v.shape != w_obs.shape or v.ndim != 1:
        raise ValidationError("voltage and shift must be 1-D arrays of equal length")
    if np.unique(v).size < MIN_VOLTAGES:
        raise ValidationError(f"a parabola fit needs at least {MIN_VOLTAGES} distinct voltages")
    if sigma is None:
        wt = np.ones_like(v)
        absolute = False
    else:
        sig = np.broadcast_to(np.asarray(sigma, dtype=float), v.shape)
        if np.any(~(sig > 0)):
            raise ValidationError("sigma must be strictly positive")
        wt = 1.0 / sig
        absolute = True

    # centred and scaled abscissa for conditioning
    vc = float(np.mean(v))
    vs = float(np.ptp(v)) / 2.0
    u = (v - vc) / vs
    design = np.column_stack([u * u, u, np.ones_like(u)]) * wt[:, None]
    q, r = np.linalg.qr(design)
    a2, b1, d0 = np.linalg.solve(r, q.T @ (w_obs * wt))
    resid = (w_obs - (a2 * u * u + b1 * u + d0)) * wt
    chi2 = float(resid @ resid)
    dof = v.size - 3
    rinv = np.linalg.inv(r)
    cov = rinv @ rinv.T
    if not absolute:
        cov = cov * (chi2 / dof if dof > 0 else 0.0)

    if not a2 < 0:
        raise FitError(
            f"electrostatic signature absent: fitted curvature is non-negative at z={z_piezo!r}",
            np.array([a2, b1, d0]),
            [chi2],
        )
    u0 = -b1 / (2.0 * a2)
    V0 = vc + vs * u0
    beta = -a2 / vs**2
    shift0 = d0 - b1 * b1 / (4.0 * a2)

    # gradients with respect to (a2, b1, d0)
    g_v0 = vs * np.array([b1 / (2.0 * a2 * a2), -1.0 / (2.0 * a2), 0.0])
    g_beta = np.array([-1.0 / vs**2, 0.0, 0.0])
    g_shift = np.array([b1 * b1 / (4.0 * a2 * a2), -b1 / (2.0 * a2), 1.0])

    def _sd(g, scale):
        var = float(g @ cov @ g)
        return max(np.sqrt(max(var, 0.0)), 4 * _EPS * abs(scale), 1e-300)

    return ParabolaFitPoint(
        z_piezo=float(z_piezo),
        V0=float(V0),
        V0_sigma=_sd(g_v0, max(abs(V0), vs)),
        beta=float(beta),
        beta_sigma=_sd(g_beta, beta),
        casimir_shift=float(shift0),
        casimir_shift_sigma=_sd(g_shift, shift0),
        chi2=chi2,
        dof=dof,
    )


def fit_sweeps(dataset, sigma=None):
    """`fit_sweep_parabola` for every sweep of a `SweepDataset`."""
    points = []
    for z, mask in dataset.groups():
        s = None if sigma is None else np.broadcast_to(sigma, dataset.shift.shape)[mask]
        points.append(fit_sweep_parabola(dataset.voltage[mask], dataset.shift[mask], s, z))
    return points


def _beta_model(R):
    def model(p, z):
        a = p[0] + z
        if np.any(a <= 0):
            return np.full_like(z, np.inf)
        return p[1] * beta_geometric(SpherePlateGeometry(R, a))

    return model


def fit_absolute_separation(points, R):
    """Fit ``beta(z) = C * beta_geometric(a0 + z, R)`` for ``(a0, C)``.

    Returns ``(a0, C, covariance)``. Each curvature is weighted by its
    ``beta_sigma``. Those sigmas are usually residual-based estimates, so the
    covariance is inflated by the reduced chi-square whenever that exceeds 1.
    """
    if len(points) < MIN_POINTS:
        raise ValidationError(f"need at least {MIN_POINTS} parabola fits, got {len(points)}")
    z = np.array([p.z_piezo for p in points])
    beta = np.array([p.beta for p in points])
    sig = np.array([p.beta_sigma for p in points])
    if np.ptp(z) < MIN_SPAN:
        raise ValidationError(
            f"piezo positions span {np.ptp(z) / NM:.1f} nm; at least {MIN_SPAN / NM:.0f} nm is required"
        )
    c0 = float(np.median(beta)) / beta_geometric(SpherePlateGeometry(R, A0_GUESS + float(np.median(z))))
    res = fit_nonlinear_least_squares(
        _beta_model(R), z, beta, sig, [A0_GUESS, c0], p_scale=[A0_GUESS, abs(c0)]
    )
    a0, C = res.params
    if not (a0 > 0 and C > 0):
        raise FitError(f"unphysical calibration a0={a0!r}, C={C!r}", res.params, [res.chi2])
    return float(a0), float(C), res.covariance * max(1.0, res.reduced_chi2)


def fit_v0_line(points, a0):
    """Weighted straight line ``V0 = slope * a[nm] + intercept`` in mV.

    Returns ``(FitResult, v0_mean)`` where ``v0_mean`` (V) is the unweighted
    mean of the fitted vertices. As in `fit_absolute_separation`, the
    covariance is inflated by the reduced chi-square when that exceeds 1.
    """
    a_nm = (a0 + np.array([p.z_piezo for p in points])) / NM
    v0_mv = np.array([p.V0 for p in points]) / MV
    sig_mv = np.array([p.V0_sigma for p in points]) / MV
    fit = fit_linear_least_squares(a_nm, v0_mv, sig_mv)
    if fit.dof > 0 and fit.reduced_chi2 > 1:
        fit = replace(fit, covariance=fit.covariance * fit.reduced_chi2)
    return fit, float(np.mean(v0_mv)) * MV


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of the calibration chain (SI units).

    ``v0_fit`` holds the line in mV/nm and mV; ``v0_slope`` (V/m) and
    ``v0_intercept`` (V) repeat it in SI units.
    """

    a0: float
    a0_sigma: float
    C: float
    C_sigma: float
    points: List[ParabolaFitPoint]
    v0_fit: FitResult
    v0_mean: float
    R: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.a0 > 0 and self.C > 0):
            raise ValidationError("calibration requires a0 > 0 and C > 0")
        z = np.array([p.z_piezo for p in self.points])
        if np.any(np.diff(z) <= 0):
            raise ValidationError("absolute separations must increase strictly with z")

    @property
    def separations(self):
        return self.a0 + np.array([p.z_piezo for p in self.points])

    @property
    def v0_slope_mv_per_nm(self):
        return float(self.v0_fit.params[0])

    @property
    def v0_intercept_mv(self):
        return float(self.v0_fit.params[1])

    @property
    def v0_slope(self):
        return self.v0_slope_mv_per_nm * MV / NM

    @property
    def v0_intercept(self):
        return self.v0_intercept_mv * MV

    def beta_at(self, z):
        """Curvature interpolated in ``z`` from the fitted points."""
        zs = np.array([p.z_piezo for p in self.points])
        return np.interp(z, zs, [p.beta for p in self.points])

    def v0_at_z(self, z):
        zs = np.array([p.z_piezo for p in self.points])
        return np.interp(z, zs, [p.V0 for p in self.points])

    def to_dict(self):
        fit = self.v0_fit
        return {
            "a0": self.a0,
            "a0_sigma": self.a0_sigma,
            "C": self.C,
            "C_sigma": self.C_sigma,
            "R": self.R,
            "v0_mean": self.v0_mean,
            "v0_mean_mV": self.v0_mean / MV,
            "v0_fit": {
                "slope_mV_per_nm": self.v0_slope_mv_per_nm,
                "intercept_mV": self.v0_intercept_mv,
                "slope_V_per_m": self.v0_slope,
                "intercept_V": self.v0_intercept,
                "covariance_mV_nm": fit.covariance.tolist(),
                "chi2": fit.chi2,
                "dof": fit.dof,
            },
            "points": [asdict(p) for p in self.points],
            "metadata": self.metadata,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_dict(cls, d):
        f = d["v0_fit"]
        fit = FitResult(
            np.array([f["slope_mV_per_nm"], f["intercept_mV"]]),
            np.array(f["covariance_mV_nm"]),
            f["chi2"],
            f["dof"],
        )
        points = [ParabolaFitPoint(**p) for p in d["points"]]
        return cls(
            d["a0"], d["a0_sigma"], d["C"], d["C_sigma"], points, fit, d["v0_mean"],
            d.get("R"), d.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, source):
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            source = Path(source).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(source))


def run_calibration(dataset, R, sigma=None):
    """Run the whole chain on a drift-corrected `SweepDataset`."""
    points = fit_sweeps(dataset, sigma)
    points.sort(key=lambda p: p.z_piezo)
    a0, C, cov = fit_absolute_separation(points, R)
    v0_fit, v0_mean = fit_v0_line(points, a0)
    sd = np.sqrt(np.diag(cov))
    return CalibrationResult(
        a0, float(sd[0]), C, float(sd[1]), points, v0_fit, v0_mean, R,
        {"correlation_a0_C": float(cov[0, 1] / (sd[0] * sd[1]))},
    )
