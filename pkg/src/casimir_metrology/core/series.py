"""Truncated summation of convergent series."""
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ..errors import SeriesError, ValidationError

DEFAULT_REL_TOL = 1e-10

Number = Union[float, np.ndarray]


@dataclass(frozen=True)
class SeriesResult:
    value: Number
    terms_used: int
    converged: bool


def sum_series(
    term: Callable[[int], Number],
    rel_tol: float = DEFAULT_REL_TOL,
    max_terms: int = 1_000_000,
    min_terms: int = 1,
    start: int = 1,
    block: int = 1,
) -> SeriesResult:
    """Sum ``term(start) + term(start+1) + ...`` until the tail is negligible.

    Summation stops at the first index ``n`` (after at least ``min_terms``
    terms) where ``|term(n)| <= rel_tol * |partial sum|``. ``term`` may
    return an array, in which case the criterion must hold elementwise and
    the result is an array of partial sums.

    Parameters
    ----------
    term : callable
        Maps the integer index to the summand.
    rel_tol : float
        Relative size of the last accepted term.
    max_terms : int
        Hard cap; reaching it returns ``converged=False``.
    min_terms : int
        Minimum number of terms before the stopping rule is consulted.
        Useful when leading terms vanish identically.
    start : int
        First index.
    block : int
        With ``block > 1``, ``term`` receives a 1-D array of consecutive
        indices and returns summands stacked along the leading axis. The
        stopping rule is unchanged; only the number of Python calls drops.

    Raises
    ------
    SeriesError
        If a term is not finite.
    """
    if not rel_tol > 0:
        raise ValidationError("rel_tol must be positive")
    if max_terms < 1:
        raise ValidationError("max_terms must be >= 1")

    if block > 1:
        return _sum_blocks(term, rel_tol, max_terms, min_terms, start, block)
    partial = None
    for count in range(1, max_terms + 1):
        n = start + count - 1
        t = term(n)
        if not np.all(np.isfinite(t)):
            raise SeriesError(f"non-finite series term at index n={n}")
        partial = t if partial is None else partial + t
        if count >= min_terms and np.all(np.abs(t) <= rel_tol * np.abs(partial)):
            return SeriesResult(partial, count, True)
    return SeriesResult(partial, max_terms, False)


def _sum_blocks(term, rel_tol, max_terms, min_terms, start, block):
    partial = 0.0
    count = 0
    while count < max_terms:
        k = min(block, max_terms - count)
        idx = np.arange(start + count, start + count + k)
        t = np.asarray(term(idx), dtype=float)
        bad = ~np.isfinite(t)
        if np.any(bad):
            first = int(np.argmax(bad.reshape(k, -1).any(axis=1)))
            raise SeriesError(f"non-finite series term at index n={int(idx[first])}")
        run = partial + np.cumsum(t, axis=0)
        ok = (np.abs(t) <= rel_tol * np.abs(run)).reshape(k, -1).all(axis=1)
        ok &= np.arange(count + 1, count + k + 1) >= min_terms
        if np.any(ok):
            i = int(np.argmax(ok))
            return SeriesResult(run[i], count + i + 1, True)
        partial = run[-1]
        count += k
    return SeriesResult(partial, max_terms, False)
