r"""Log-Gamma, double-Gamma ratios by the shift relation, and their
semi-classical limits.

The double-Gamma function ``Gamma_{gamma/2}`` is only ever evaluated through
ratios, using

.. math::

    \Gamma_{\gamma/2}(z + \chi) = \sqrt{2\pi}\,
    \frac{\chi^{\chi z - 1/2}}{\Gamma(\chi z)}\,\Gamma_{\gamma/2}(z),
    \qquad \chi \in \{\gamma/2,\ 2/\gamma\}.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import loggamma

from .lame import LameParams
from .numerics import QuadratureSpec, integrate_singular

__all__ = [
    "PoleError",
    "DivergenceError",
    "GammaRatioChain",
    "log_gamma",
    "log_shift_ratio",
    "shift_ratio",
    "semiclassical_B",
    "AsymptoteRow",
    "asymptote_check",
    "claimed_limit",
    "LOG_SQRT_2PI",
]

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_POLE_TOL = 1e-14


class PoleError(ArithmeticError):
    """A Gamma-function pole was hit; ``index`` names the chain step."""

    def __init__(self, message, index=None, argument=None):
        super().__init__(message)
        self.index = index
        self.argument = argument


class DivergenceError(ArithmeticError):
    """A truncated semi-infinite integral failed to settle."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = tuple(history)


def _is_pole(z: complex) -> bool:
    return abs(z.imag) < _POLE_TOL and z.real < _POLE_TOL and abs(z.real - round(z.real)) < _POLE_TOL


def log_gamma(z) -> complex | np.ndarray:
    """Principal-branch ``log Gamma`` (scipy's ``loggamma`` on complex input).

    Raises
    ------
    PoleError
        At a non-positive integer.
    """
    arr = np.asarray(z, dtype=complex)
    flat = arr.ravel()
    for i, w in enumerate(flat):
        if _is_pole(complex(w)):
            raise PoleError(f"log_gamma pole at z = {complex(w)!r}", i, complex(w))
    out = loggamma(arr)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GammaRatioChain:
    """``Gamma_{gamma/2}(z + k chi) / Gamma_{gamma/2}(z)`` as ``k`` shifts."""

    z: complex
    chi: float
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if not self.chi > 0:
            raise ValueError("chi must be positive")

    def arguments(self) -> np.ndarray:
        """The ``Gamma`` arguments ``chi (z + j chi)``, ``j = 0..k-1``."""
        j = np.arange(self.k)
        return self.chi * (complex(self.z) + j * self.chi)


def log_shift_ratio(chain: GammaRatioChain) -> complex:
    """Sum of the log shift factors ``log sqrt(2 pi) + (chi z_j - 1/2) log chi
    - log Gamma(chi z_j)`` over the chain."""
    args = chain.arguments()
    for j, w in enumerate(args):
        if _is_pole(complex(w)):
            raise PoleError(
                f"shift chain crosses the Gamma pole at step j = {j} (argument {complex(w)!r})",
                j,
                complex(w),
            )
    if chain.k == 0:
        return 0j
    lc = math.log(chain.chi)
    terms = LOG_SQRT_2PI + (args - 0.5) * lc - loggamma(args)
    return complex(np.sum(terms))


def shift_ratio(chain: GammaRatioChain) -> complex:
    """``Gamma_{gamma/2}(z + k chi) / Gamma_{gamma/2}(z)``."""
    return cmath.exp(log_shift_ratio(chain))


def _log_gamma_integral(shift: complex, lo: float, hi: float, spec: QuadratureSpec | None) -> complex:
    """``int_lo^hi log Gamma(shift - x) dx`` (oriented) on the real segment.

    The argument is formed as ``(shift - lo) - (hi - lo) t`` so that a
    ``log Gamma`` singularity at the lower endpoint is resolved down to the
    smallest quadrature nodes instead of rounding to the pole.
    """
    if lo == hi:
        return 0j
    width = hi - lo
    base = complex(shift) - lo

    def f(t):
        return loggamma(np.asarray(base - width * np.asarray(t), dtype=complex))

    return width * complex(integrate_singular(f, spec))


def _check_interior(shift: complex, lo: float, hi: float, name: str) -> None:
    """Raise if ``shift - x`` crosses a Gamma pole strictly inside ``[lo, hi]``."""
    if abs(shift.imag) > _POLE_TOL:
        return
    a, b = sorted((shift.real - lo, shift.real - hi))
    for n in range(math.floor(b), math.ceil(a) + 1):
        if n <= 0 and a - 1e-12 > n > b + 1e-12:
            raise PoleError(f"{name}: log Gamma argument crosses the pole at {n}", argument=complex(n))


def semiclassical_B(params: LameParams, spec: QuadratureSpec | None = None, constant: str = "printed"):
    r"""Semi-classical limit of ``gamma^2 log A_{gamma, P}(alpha)``.

    .. math::

        \mathcal B = \frac{i\pi\alpha_0(\alpha_0 + iP_0)}{2} + 4\alpha_0 c
        - \sum_{j=1}^{4} \int_{\ell_j}^{u_j} \log\Gamma(s_j - x)\,dx,

    with ``(s_j, l_j, u_j)``:
    ``(1 - a, 1 - a, 1 + a)``, ``(1 + a, 1 + a, 1 + 3a)``,
    ``(1 - iP0/2 - a, 1 - a, 1 + a)``, ``(1 + iP0/2 - a, 1 - a, 1 + a)``
    where ``a = alpha0/4``.  The constant is ``c = sqrt(2 pi)`` when
    ``constant="printed"`` and ``c = log sqrt(2 pi)`` when ``constant="lemma"``
    (the value the shift-relation derivation produces).  The endpoint
    ``log Gamma`` singularities at argument ``0`` are integrable and handled
    by the double-exponential rule.
    """
    if constant not in ("printed", "lemma"):
        raise ValueError("constant must be 'printed' or 'lemma'")
    a0, P0 = float(params.alpha0), float(params.P0)
    a = a0 / 4
    c = math.sqrt(2 * math.pi) if constant == "printed" else LOG_SQRT_2PI
    pieces = [
        (1 - a, 1 - a, 1 + a),
        (1 + a, 1 + a, 1 + 2 * a + a),
        (1 - 0.5j * P0 - a, 1 - a, 1 + a),
        (1 + 0.5j * P0 - a, 1 - a, 1 + a),
    ]
    total = 0.5j * math.pi * a0 * (a0 + 1j * P0) + 4 * a0 * c
    for j, (s, lo, hi) in enumerate(pieces, 1):
        _check_interior(complex(s), lo, hi, f"integral {j}")
        total -= _log_gamma_integral(complex(s), lo, hi, spec)
    return complex(total)


def claimed_limit(xi: complex, spec: QuadratureSpec | None = None, tol: float = 1e-10, max_doublings: int = 12):
    """``-4 Re(xi) log sqrt(2 pi) + int_{-inf}^{Re xi} log Gamma(xi - x) dx``.

    The semi-infinite range is truncated to ``[A, Re xi]`` with
    ``A = -1, -2, -4, ...``; the value is accepted once consecutive
    truncations agree to ``tol``.

    Raises
    ------
    DivergenceError
        If the truncations never settle (``log Gamma`` grows at large
        argument, so the integral diverges for every ``xi``).
    """
    xi = complex(xi)
    if xi.real <= 0:
        raise ValueError("only Re(xi) > 0 is implemented")
    R = xi.real
    prev = None
    history = []
    A = -1.0
    for _ in range(max_doublings):
        val = -4 * R * LOG_SQRT_2PI + _log_gamma_integral(xi, A, R, spec)
        history.append((A, val))
        if prev is not None and abs(val - prev) < tol:
            return val
        prev = val
        A *= 2
    raise DivergenceError(
        f"truncated integral did not settle: last two values {history[-2][1]:.6g}, {history[-1][1]:.6g}",
        history,
    )


@dataclass(frozen=True)
class AsymptoteRow:
    """One ``gamma`` of the asymptote table."""

    gamma: float
    shifts: int
    bracket: complex | None
    limit: complex | None
    gap: float | None


def _bracket(xi: complex, gamma: float) -> tuple[int, complex]:
    """Finite-``gamma`` combination of the asymptote lemma.

    ``gamma^2 [log G(2 xi/gamma) - log G(2 i Im xi/gamma)]`` is assembled from
    a ``gamma/2``-chain of ``floor(4 Re xi / gamma^2)`` shifts starting at
    ``2 i Im xi / gamma``; the term ``gamma^2 log(gamma/2) int_0^{Re xi}
    (xi - x) dx`` is subtracted.
    """
    chi = gamma / 2
    ratio = 4 * xi.real / gamma**2
    k = round(ratio) if abs(ratio - round(ratio)) < 1e-9 else math.floor(ratio)
    z0 = 2j * xi.imag / gamma
    log_ratio = log_shift_ratio(GammaRatioChain(z0, chi, k))
    R = xi.real
    lin = xi * R - R * R / 2
    return k, gamma**2 * log_ratio - gamma**2 * math.log(chi) * lin


def asymptote_check(xi: complex, gammas=(0.4, 0.2, 0.1, 0.05), spec: QuadratureSpec | None = None):
    """Gap between the finite-``gamma`` bracket and the claimed limit.

    Returns one :class:`AsymptoteRow` per ``gamma``.  A chain pole or a
    divergent limit integral raises (``PoleError`` / ``DivergenceError``).
    """
    xi = complex(xi)
    if xi.real <= 0:
        raise ValueError("Re(xi) must be positive")
    g = list(gammas)
    if any(b >= a for a, b in zip(g, g[1:])):
        raise ValueError("gamma grid must be strictly decreasing")
    rows = []
    brackets = [_bracket(xi, gm) for gm in g]
    limit = claimed_limit(xi, spec)
    for gm, (k, br) in zip(g, brackets):
        rows.append(AsymptoteRow(gm, k, br, limit, abs(br - limit)))
    return rows
