"""Least-squares polynomial fitting with complex data."""

from __future__ import annotations

from collections import Counter
from typing import Iterable

import numpy as np

__all__ = ["fit_polynomial", "FitError"]


class FitError(ValueError):
    """Rank-deficient fit."""


def fit_polynomial(samples: Iterable[tuple[complex, complex]], degree: int) -> np.ndarray:
    """Least-squares coefficients ``c_0 .. c_degree`` of ``sum c_k x**k``.

    Columns of the Vandermonde matrix are scaled by powers of ``max|x|``
    before solving, which keeps grids of small abscissae (for example nomes
    of order ``1e-3``) well conditioned.

    Parameters
    ----------
    samples : iterable of (x, y)
    degree : int

    Returns
    -------
    ndarray of complex, length ``degree + 1``

    Raises
    ------
    FitError
        If fewer than ``degree + 1`` distinct abscissae are given.

    Examples
    --------
    >>> fit_polynomial([(0, 1), (1, 2), (2, 3)], 1).real.round(12).tolist()
    [1.0, 1.0]
    """
    pts = list(samples)
    if degree < 0:
        raise ValueError("degree must be non-negative")
    x = np.array([complex(p[0]) for p in pts])
    y = np.array([complex(p[1]) for p in pts])
    distinct = len(set(x.tolist()))
    if distinct < degree + 1:
        dupes = sorted(
            (v for v, c in Counter(x.tolist()).items() if c > 1), key=lambda v: (v.real, v.imag)
        )
        raise FitError(
            f"{distinct} distinct abscissae cannot determine degree {degree}; "
            f"duplicated: {dupes}"
        )
    scale = float(np.max(np.abs(x))) or 1.0
    V = np.vander(x / scale, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    return coef / scale ** np.arange(degree + 1)
