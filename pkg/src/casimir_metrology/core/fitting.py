"""Weighted linear and Levenberg-Marquardt nonlinear least squares."""
from dataclasses import dataclass

import numpy as np

from ..errors import FitError, ValidationError


@dataclass(frozen=True)
class FitResult:
    """Outcome of a least-squares fit.

    ``covariance`` is absolute when per-point sigmas were supplied, otherwise
    it is scaled by the reduced chi-square of the residuals.
    """

    params: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int

    @property
    def errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof


def _weights(y, sigma):
    if sigma is None:
        return np.ones_like(y), False
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if np.any(~(sigma > 0)):
        raise ValidationError("sigma must be strictly positive")
    return 1.0 / sigma, True


def _symmetrize(cov):
    return 0.5 * (cov + cov.T)


def fit_linear_least_squares(x, y, sigma=None):
    """Fit ``y = slope*x + intercept`` minimising chi-square.

    Returns a `FitResult` with ``params = [slope, intercept]``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be 1-D arrays of equal length")
    if x.size < 3:
        raise ValidationError("at least 3 points are required for a line fit")
    w, absolute = _weights(y, sigma)
    # centring keeps the normal equations well conditioned
    xc = np.average(x, weights=w**2)
    dx = x - xc
    if np.all(dx == 0) or np.ptp(x) == 0:
        raise ValidationError("degenerate x: all abscissae are equal")

    design = np.column_stack([dx, np.ones_like(dx)]) * w[:, None]
    q, r = np.linalg.qr(design)
    coef_c = np.linalg.solve(r, q.T @ (y * w))
    slope, intercept_c = coef_c
    intercept = intercept_c - slope * xc

    resid = (y - (slope * x + intercept)) * w
    chi2 = float(resid @ resid)
    dof = x.size - 2

    rinv = np.linalg.inv(r)
    cov_c = rinv @ rinv.T
    # transform covariance from (slope, intercept_c) to (slope, intercept)
    jac = np.array([[1.0, 0.0], [-xc, 1.0]])
    cov = jac @ cov_c @ jac.T
    if not absolute:
        cov = cov * (chi2 / dof)
    return FitResult(np.array([slope, intercept]), _symmetrize(cov), chi2, dof)


def numeric_jacobian(func, p, scale):
    """Central-difference Jacobian of ``func`` (vector valued) at ``p``."""
    p = np.asarray(p, dtype=float)
    cols = []
    for j in range(p.size):
        h = 1e-6 * scale[j]
        up = p.copy()
        dn = p.copy()
        up[j] += h
        dn[j] -= h
        cols.append((func(up) - func(dn)) / (2.0 * h))
    return np.column_stack(cols)


def fit_nonlinear_least_squares(
    model,
    x,
    y,
    sigma,
    p0,
    p_scale=None,
    max_iter=200,
    chi2_rtol=1e-10,
    step_tol=1e-12,
):
    """Levenberg-Marquardt minimisation of ``sum(((y - model(p, x))/sigma)**2)``.

    Parameters
    ----------
    model : callable
        ``model(params, x) -> ndarray`` with the shape of ``y``.
    x, y : array_like
        Data.
    sigma : array_like or None
        Per-point standard deviations. ``None`` means unit weights with the
        covariance rescaled by the reduced chi-square.
    p0 : array_like
        Starting parameters.
    p_scale : array_like, optional
        Typical magnitude of each parameter; sets the finite-difference step
        (``1e-6 * p_scale``) and the scale of the step-size test. Defaults to
        ``|p0|`` (or 1 where ``p0`` is zero).

    Notes
    -----
    Terminates when an accepted step changes chi-square by less than
    ``chi2_rtol`` relative, when the scaled step norm falls below
    ``step_tol``, or when no damping level lowers chi-square any further.
    The returned chi-square is never larger than ``chi2(p0)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = np.array(p0, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValidationError("initial parameters must be finite")
    w, absolute = _weights(y, sigma)
    if p_scale is None:
        p_scale = np.where(p != 0, np.abs(p), 1.0)
    p_scale = np.asarray(p_scale, dtype=float)
    dof = y.size - p.size
    if dof < 1:
        raise ValidationError("need more data points than parameters")

    def residuals(params):
        return (y - model(params, x)) * w

    r = residuals(p)
    if not np.all(np.isfinite(r)):
        raise FitError("model is not finite at the initial parameters", p, [])
    chi2 = float(r @ r)
    trace = [chi2]
    lam = 1e-3

    converged = False
    for _ in range(max_iter):
        if chi2 == 0.0:
            converged = True
            break
        # d(resid)/dp = -w * d(model)/dp
        jac = -numeric_jacobian(residuals, p, p_scale)
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag == 0] = 1.0
        improved = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            r_trial = residuals(trial)
            chi2_trial = float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else np.inf
            if chi2_trial <= chi2:
                improved = True
                break
            lam *= 10.0
        if not improved:
            converged = True
            break
        rel_change = (chi2 - chi2_trial) / chi2 if chi2 > 0 else 0.0
        step_norm = float(np.linalg.norm(step / p_scale))
        p, r, chi2 = trial, r_trial, chi2_trial
        trace.append(chi2)
        lam = max(lam / 10.0, 1e-12)
        if rel_change < chi2_rtol or step_norm < step_tol:
            converged = True
            break

    if not converged:
        raise FitError(
            f"Levenberg-Marquardt did not converge in {max_iter} iterations; "
            f"last params={p.tolist()}, chi2 trace={trace}",
            p,
            trace,
        )

    jac = -numeric_jacobian(residuals, p, p_scale)
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError as exc:
        raise FitError("singular Jacobian at the solution; parameters not identifiable", p, trace) from exc
    if not absolute:
        cov = cov * (chi2 / dof)
    return FitResult(p, _symmetrize(cov), chi2, dof)
