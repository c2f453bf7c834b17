"""Vectorised adaptive Simpson quadrature on finite and semi-infinite ranges.

The integrand is always called with a 1-D array of abscissae. It may return
either an array of the same length or a 2-D array of shape ``(m, len(x))``;
the latter integrates ``m`` functions at once on a shared subdivision, which
is how the Lifshitz and Kramers-Kronig integrals batch over frequencies.

Semi-infinite integrals use the substitution ``x = lower - scale*ln(1 - t)``
which maps ``t in [0, 1)`` onto ``[lower, inf)`` and turns an ``exp(-x/scale)``
tail into a bounded, smooth integrand in ``t``.
"""
import numpy as np

from ..errors import QuadratureError, ValidationError

DEFAULT_REL_TOL = 1e-10


def _as_2d(values, n):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return values.reshape(1, n)
    return values


def integrate_interval(
    f,
    a,
    b,
    rel_tol=DEFAULT_REL_TOL,
    abs_tol=0.0,
    breakpoints=None,
    initial_splits=4,
    max_evals=2_000_000,
):
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson subdivision.

    Parameters
    ----------
    f : callable
        Vectorised integrand, see module docstring.
    a, b : float
        Finite integration limits, ``a < b``.
    rel_tol, abs_tol : float
        Target accuracy per component: ``|error| <= max(abs_tol, rel_tol*|I|)``.
    breakpoints : sequence of float, optional
        Interior points where ``f`` has kinks; used as initial interval edges.
    initial_splits : int
        Each initial segment is split into this many equal pieces before
        adaptation starts, so narrow features are not skipped.
    max_evals : int
        Budget of integrand evaluations.

    Returns
    -------
    float or ndarray
        Scalar for scalar-valued ``f``, otherwise an array of length ``m``.

    Raises
    ------
    QuadratureError
        When the evaluation budget is exhausted before the target accuracy.
    """
    if not b > a:
        raise ValidationError("integration limits must satisfy a < b")
    edges = [a, b]
    if breakpoints is not None:
        inner = [float(p) for p in np.ravel(breakpoints) if a < p < b]
        edges = sorted(set([a, b] + inner))
    edges = np.asarray(edges, dtype=float)
    if initial_splits > 1:
        frac = np.linspace(0.0, 1.0, initial_splits + 1)[:-1]
        edges = np.concatenate(
            [lo + (hi - lo) * frac for lo, hi in zip(edges[:-1], edges[1:])] + [[b]]
        )

    left = edges[:-1]
    right = edges[1:]
    mid = 0.5 * (left + right)
    x0 = np.concatenate([edges, mid])
    f0 = f(x0)
    scalar = np.ndim(f0) == 1
    f0 = _as_2d(f0, x0.size)
    if not np.all(np.isfinite(f0)):
        raise QuadratureError("integrand returned non-finite values")
    n_edges = edges.size
    fl = f0[:, : n_edges - 1]
    fr = f0[:, 1:n_edges]
    fm = f0[:, n_edges:]
    n_evals = x0.size

    span = b - a
    accepted = np.zeros(f0.shape[0])
    accepted_err = np.zeros(f0.shape[0])

    while left.size:
        h = right - left
        x1 = 0.5 * (left + mid)
        x3 = 0.5 * (mid + right)
        fq = _as_2d(f(np.concatenate([x1, x3])), 2 * left.size)
        n_evals += 2 * left.size
        f1 = fq[:, : left.size]
        f3 = fq[:, left.size :]
        if not (np.all(np.isfinite(f1)) and np.all(np.isfinite(f3))):
            raise QuadratureError("integrand returned non-finite values")

        whole = h / 6.0 * (fl + 4.0 * fm + fr)
        half_l = h / 12.0 * (fl + 4.0 * f1 + fm)
        half_r = h / 12.0 * (fm + 4.0 * f3 + fr)
        refined = half_l + half_r
        err = np.abs(refined - whole) / 15.0

        estimate = accepted + refined.sum(axis=1)
        tol = np.maximum(abs_tol, rel_tol * np.abs(estimate))
        # the floor stops endless bisection next to integrable endpoint singularities;
        # only a handful of intervals ever fall below 1e-6 of the span
        share = tol[:, None] * np.maximum(h / span, 1e-6)[None, :]
        tiny = h <= np.maximum(
            64 * np.finfo(float).eps * np.maximum(np.abs(left), np.abs(right)),
            span * 2.0**-62,
        )
        ok = np.all(err <= share, axis=0) | tiny

        accepted += (refined[:, ok] + (refined[:, ok] - whole[:, ok]) / 15.0).sum(axis=1)
        accepted_err += err[:, ok].sum(axis=1)

        split = ~ok
        if not split.any():
            break
        if n_evals > max_evals:
            pending = refined[:, split].sum(axis=1)
            bound = accepted_err + err[:, split].sum(axis=1)
            est = accepted + pending
            raise QuadratureError(
                f"adaptive Simpson exceeded {max_evals} evaluations; "
                f"estimate={est.tolist()}, error bound={bound.tolist()}",
                estimate=est[0] if scalar else est,
                error_bound=bound[0] if scalar else bound,
            )
        l_s, m_s, r_s = left[split], mid[split], right[split]
        left = np.concatenate([l_s, m_s])
        right = np.concatenate([m_s, r_s])
        mid = 0.5 * (left + right)
        fl_s, fm_s, fr_s = fl[:, split], fm[:, split], fr[:, split]
        fl = np.concatenate([fl_s, fm_s], axis=1)
        fr = np.concatenate([fm_s, fr_s], axis=1)
        fm = np.concatenate([f1[:, split], f3[:, split]], axis=1)

    return accepted[0] if scalar else accepted


def integrate_semi_infinite(f, rel_tol=DEFAULT_REL_TOL, lower=0.0, scale=1.0, abs_tol=0.0, **kwargs):
    """Integrate ``f`` over ``[lower, inf)``.

    Uses ``x = lower - scale*ln(1 - t)`` and adaptive Simpson in ``t``. The
    integrand must decay fast enough that ``f(x) * scale/(1 - t) -> 0`` as
    ``t -> 1``; the endpoint ``t = 1`` itself is assigned the value 0.
    Internally the integration variable is ``u = 1 - t``.

    ``scale`` should match the decay length of ``f``.
    """
    if not scale > 0:
        raise ValidationError("scale must be positive")

    # integrate in u = 1 - t so that the far tail (u -> 0) stays resolvable
    def g(u):
        u = np.asarray(u, dtype=float)
        inside = u > 0.0
        uu = np.where(inside, u, 1.0)
        x = lower - scale * np.log(uu)
        vals = np.asarray(f(x), dtype=float) * (scale / uu)
        return np.where(inside, vals, 0.0)

    return integrate_interval(g, 0.0, 1.0, rel_tol=rel_tol, abs_tol=abs_tol, **kwargs)
