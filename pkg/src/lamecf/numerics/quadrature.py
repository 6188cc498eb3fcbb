"""Quadrature on (0, 1) for integrands with power-law endpoint singularities.

The default rule is the tanh-sinh (double-exponential) transform

    x(t) = 1 / (1 + exp(-pi sinh t)),

refined by halving the step in ``t`` and re-using every previously computed
node.  Integrands may be vector valued: ``f`` maps an array of abscissae of
shape ``(n,)`` to an array of shape ``(n,)`` or ``(n, k)``.

Because the nodes cluster at the endpoints down to ``1e-300``, the integrand
can optionally receive the complement ``1 - x`` computed without
cancellation (``complement=True``), which matters whenever ``f`` has to
evaluate something like ``sin(pi * (1 - x))`` near ``x = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate as _sp_integrate

__all__ = [
    "QuadratureSpec",
    "QuadResult",
    "QuadratureError",
    "integrate_singular",
]

#: Smallest node distance from an endpoint that the transform produces.
_X_FLOOR = 1e-300


class QuadratureError(ArithmeticError):
    """Quadrature failure.

    Attributes
    ----------
    estimates : tuple
        The last two estimates produced before giving up (may be empty when
        the failure is a non-finite integrand value).
    abscissa : float or None
        The offending node for non-finite integrand values.
    """

    def __init__(self, message, estimates=(), abscissa=None):
        super().__init__(message)
        self.estimates = tuple(estimates)
        self.abscissa = abscissa


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings for :func:`integrate_singular`.

    Parameters
    ----------
    method : {"tanh-sinh", "composite"}
        ``"tanh-sinh"`` is the double-exponential rule.  ``"composite"``
        delegates to QUADPACK's algebraic-weight routine (QAWS), which
        integrates ``g(x) = f(x) / (x**a (1-x)**b)`` against the exact weight
        ``x**a (1-x)**b``; it is used as an independent refinement oracle.
    atol, rtol : float
        Absolute and relative tolerances.
    max_level : int
        Maximum number of step halvings (tanh-sinh) or ``2**max_level``
        subintervals (composite).
    endpoint_exponents : tuple of float
        Known singularity strengths ``(a, b)`` so that ``f ~ x**a`` near 0
        and ``f ~ (1-x)**b`` near 1.  They bound how close to the endpoints
        nodes are needed and supply the weight for the composite method.
    """

    method: str = "tanh-sinh"
    atol: float = 1e-13
    rtol: float = 1e-12
    max_level: int = 10
    endpoint_exponents: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.method not in ("tanh-sinh", "composite"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if not (self.atol > 0 and self.rtol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_level < 1:
            raise ValueError("max_level must be at least 1")
        a, b = self.endpoint_exponents
        if not (a > -1 and b > -1):
            raise ValueError(
                f"endpoint exponents {self.endpoint_exponents} are not integrable"
            )

    def with_(self, **changes) -> "QuadratureSpec":
        """Return a copy with some fields replaced."""
        fields = dict(
            method=self.method,
            atol=self.atol,
            rtol=self.rtol,
            max_level=self.max_level,
            endpoint_exponents=self.endpoint_exponents,
        )
        fields.update(changes)
        return QuadratureSpec(**fields)


@dataclass(frozen=True)
class QuadResult:
    """Outcome of a quadrature.

    ``error`` is the difference between the last two refinement levels, a
    conservative estimate for tanh-sinh since its error roughly squares from
    one level to the next.
    """

    value: complex | np.ndarray
    error: float
    level: int
    evaluations: int
    converged: bool
    previous: complex | np.ndarray | None = None


def _t_max(exponent: float, eps: float) -> float:
    """Truncation point in ``t`` for an endpoint with ``f ~ x**exponent``.

    The contribution of the region ``x < x_c`` scales like ``x_c**(1+a)``, so
    nodes are needed down to ``x_c = eps**(1/(1+a))`` (clamped to the double
    precision floor).
    """
    x_c = max(eps ** (1.0 / (1.0 + exponent)), _X_FLOOR)
    return math.asinh(-math.log(x_c) / math.pi)


def _nodes(h: float, t_lo: float, t_hi: float, offset: bool):
    """Tanh-sinh abscissae, complements and weights on a grid of step ``h``.

    With ``offset`` only the odd multiples of ``h`` are returned (the nodes
    that are new at this level).
    """
    k = np.arange(-int(math.floor(t_lo / h)), int(math.floor(t_hi / h)) + 1)
    if offset:
        k = k[k % 2 != 0]
    t = k * h
    s = np.pi * np.sinh(t)
    # x = 1/(1+e^{-s}) and 1-x = 1/(1+e^{s}), both accurate to full relative
    # precision; the exponentials saturate safely at the extremes.
    with np.errstate(over="ignore"):
        x = 1.0 / (1.0 + np.exp(-s))
        xc = 1.0 / (1.0 + np.exp(s))
    w = h * np.pi * np.cosh(t) * x * xc
    keep = (x > 0) & (xc > 0)
    return x[keep], xc[keep], w[keep]


def _evaluate(f, x, xc, complement):
    vals = f(x, xc) if complement else f(x)
    vals = np.asarray(vals)
    if vals.shape[0] != x.shape[0]:
        raise ValueError("integrand must return one value (or row) per abscissa")
    finite = np.isfinite(vals)
    if not finite.all():
        bad = np.nonzero(~finite.reshape(len(x), -1).all(axis=1))[0][0]
        raise QuadratureError(
            f"integrand is not finite at x = {x[bad]!r} (1-x = {xc[bad]!r})",
            abscissa=float(x[bad]),
        )
    return vals


def _tanh_sinh(f, spec: QuadratureSpec, complement: bool) -> QuadResult:
    eps = min(spec.atol, spec.rtol) * 1e-3
    a, b = spec.endpoint_exponents
    t_lo = _t_max(a, eps)
    t_hi = _t_max(b, eps)

    h = 0.5
    x, xc, w = _nodes(h, t_lo, t_hi, offset=False)
    vals = _evaluate(f, x, xc, complement)
    total = np.tensordot(w, vals, axes=(0, 0))
    evaluations = len(x)
    estimate = total
    previous = None
    err = math.inf
    for level in range(1, spec.max_level + 1):
        h /= 2
        x, xc, w = _nodes(h, t_lo, t_hi, offset=True)
        vals = _evaluate(f, x, xc, complement)
        evaluations += len(x)
        # Sum of weights at the finer step: old sum scaled by 1/2 plus the
        # new odd nodes (whose weights already carry the new h).
        total = 0.5 * total + np.tensordot(w, vals, axes=(0, 0))
        previous, estimate = estimate, total
        err = float(np.max(np.abs(estimate - previous)))
        scale = float(np.max(np.abs(estimate)))
        if level >= 3 and err <= max(spec.atol, spec.rtol * scale):
            return QuadResult(_scalar(estimate), err, level, evaluations, True)
    return QuadResult(
        _scalar(estimate), err, spec.max_level, evaluations, False, _scalar(previous)
    )


def _composite(f, spec: QuadratureSpec, complement: bool) -> QuadResult:
    a, b = spec.endpoint_exponents

    def smooth_part(x: float):
        # QAWS may sample the endpoints themselves; nudge inside.
        x = min(max(x, _X_FLOOR), 1.0 - 2.0**-53)
        xa = np.array([x])
        xca = np.array([1.0 - x])
        v = _evaluate(f, xa, xca, complement)[0]
        return v / (x**a * (1.0 - x) ** b)

    probe = np.asarray(smooth_part(0.5))
    shape = probe.shape
    flat_out = []
    total_err = 0.0
    evaluations = 0
    converged = True
    limit = 2**spec.max_level
    for index in np.ndindex(shape) if shape else [()]:
        parts = []
        for take in (np.real, np.imag):
            val, err, info = _sp_integrate.quad(
                lambda x: float(take(np.asarray(smooth_part(x))[index])),
                0.0,
                1.0,
                weight="alg",
                wvar=(a, b),
                epsabs=spec.atol,
                epsrel=spec.rtol,
                limit=limit,
                full_output=1,
            )[:3]
            evaluations += int(info["neval"])
            total_err = max(total_err, float(err))
            parts.append(val)
        flat_out.append(complex(parts[0], parts[1]))
        if total_err > max(spec.atol, spec.rtol * abs(flat_out[-1])):
            converged = False
    value = np.array(flat_out).reshape(shape) if shape else flat_out[0]
    return QuadResult(value, total_err, spec.max_level, evaluations, converged)


def _scalar(value):
    value = np.asarray(value)
    if value.ndim == 0:
        return complex(value)
    return value.astype(complex)


def integrate_singular(
    f: Callable,
    spec: QuadratureSpec | None = None,
    *,
    complement: bool = False,
    full_output: bool = False,
    strict: bool = True,
):
    """Integrate ``f`` over (0, 1).

    Parameters
    ----------
    f : callable
        ``f(x)`` (or ``f(x, 1-x)`` with ``complement=True``) evaluated on a
        numpy array of abscissae.  May return a vector per abscissa.
    spec : QuadratureSpec, optional
        Rule and tolerances; the default is tanh-sinh at ``1e-12``.
    complement : bool
        Pass the cancellation-free complement ``1 - x`` as a second argument.
    full_output : bool
        Return a :class:`QuadResult` instead of the bare value.
    strict : bool
        Raise :class:`QuadratureError` on non-convergence.  With
        ``strict=False`` the best estimate is returned and the flag is
        available through ``full_output``.

    Returns
    -------
    complex or ndarray or QuadResult

    Examples
    --------
    >>> round(integrate_singular(lambda x: x**-0.5,
    ...       QuadratureSpec(endpoint_exponents=(-0.5, 0.0))).real, 12)
    2.0
    """
    spec = spec or QuadratureSpec()
    if spec.method == "tanh-sinh":
        result = _tanh_sinh(f, spec, complement)
    else:
        result = _composite(f, spec, complement)
    if strict and not result.converged:
        raise QuadratureError(
            f"quadrature did not converge within max_level={spec.max_level} "
            f"(last difference {result.error:.3e})",
            estimates=(result.previous, result.value),
        )
    return result if full_output else result.value
