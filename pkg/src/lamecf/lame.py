r"""The integral-representation solution of the semi-classical Lamé equation.

For parameters ``(alpha0, P0)`` and a torus with nome ``q`` define the weight

.. math::

    W(x) = (-\theta_1(x))^{-\alpha_0/2} e^{\pi P_0 x}, \qquad 0 < x < 1,

and the integrals

.. math::

    I_0 = \int_0^1 W(x)\,dx, \qquad
    I_{\log}(z) = \int_0^1 \log\frac{\theta_1(z+x)}{\theta_1(z)} W(x)\,dx .

The candidate solution is
``Gamma~(z) = exp(pi P0 z / 2 - (alpha0/4) Ilog(z) / I0)`` and the accessory
parameter is read off from ``-Gamma~''/Gamma~ + (alpha0/4)(alpha0/4 - 1) wp(z)``.

``theta1`` is negative on ``(0, 1)`` for real ``q`` in this package's sign
convention, so the weight uses ``-theta1``; any constant phase would cancel in
``Ilog / I0`` anyway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .elliptic import (
    LATTICE_FLOOR,
    LatticeSingularityError,
    Torus,
    theta1,
    theta1_log_derivatives,
    wp,
)
from .numerics import QuadratureSpec, integrate_singular

__all__ = [
    "LameParams",
    "BaseIntegrals",
    "AccessoryReport",
    "DEFAULT_PROBES",
    "probe_points",
    "default_quadrature",
    "weight",
    "log_theta_ratio",
    "base_integrals",
    "gamma_tilde",
    "log_derivatives",
    "accessory_at",
    "accessory_report",
    "phi_logq_coefficient",
]

#: Default probe points as ``(a, b)`` meaning ``z = a + b*tau``.
DEFAULT_PROBES = ((0.17, 0.23), (0.31, 0.11), (0.42, 0.37), (0.13, 0.41), (0.29, 0.19))

#: Absolute floor in the normalized Lamé residual.
RESIDUAL_EPS = 1e-30


@dataclass(frozen=True)
class LameParams:
    """Insertion strength ``alpha0`` in ``(-4, 2)`` and momentum ``P0``."""

    alpha0: float
    P0: float

    def __post_init__(self):
        if not (-4.0 < self.alpha0 < 2.0):
            raise ValueError(f"alpha0 = {self.alpha0} outside (-4, 2)")
        if not math.isfinite(self.P0):
            raise ValueError("P0 must be finite")

    @property
    def kappa(self) -> float:
        """Potential coefficient ``(alpha0/4)(alpha0/4 - 1)``."""
        a = self.alpha0 / 4
        return a * (a - 1)


def probe_points(torus: Torus, probes=DEFAULT_PROBES) -> np.ndarray:
    """Turn ``(a, b)`` pairs into points ``a + b*tau``."""
    return np.array([a + b * torus.tau for a, b in probes], dtype=complex)


def default_quadrature(params: LameParams) -> QuadratureSpec:
    e = -params.alpha0 / 2
    return QuadratureSpec(atol=1e-15, rtol=1e-14, max_level=12, endpoint_exponents=(e, e))


def weight(x, xc, params: LameParams, torus: Torus):
    """``(-theta1(x))**(-alpha0/2) * exp(pi P0 x)``.

    ``xc = 1 - x`` is used near ``x = 1`` through ``theta1(1-x) = theta1(x)``.
    """
    near = np.where(x <= 0.5, x, xc)
    base = -np.asarray(theta1(near, torus))
    return base ** (-params.alpha0 / 2) * np.exp(np.pi * params.P0 * x)


def _check_path(zr, floor):
    """The segment ``zr + [0, 1]`` must avoid the lattice."""
    if np.any(np.abs(zr.imag) < floor):
        bad = zr[np.abs(zr.imag) < floor][0]
        x_bad = (-bad.real) % 1.0
        raise LatticeSingularityError(
            f"log theta1(z + x) is singular on the path at x = {x_bad:.6g} "
            f"(z = {bad!r}, distance {abs(bad.imag):.3e})",
            distance=abs(bad.imag),
        )


def log_theta_ratio(z, x, torus: Torus, floor: float = LATTICE_FLOOR):
    r"""``log(theta1(z+x)/theta1(z))`` continued continuously in ``x`` from 0.

    The continuation is carried out analytically rather than by unwrapping
    phases: for ``z`` reduced to ``|Im z| <= Im(tau)/2`` with ``Im z > 0``,

    .. math::

        \log\frac{\sin\pi(z+x)}{\sin\pi z} = -i\pi x
            + \log(1-e^{2\pi i(z+x)}) - \log(1-e^{2\pi i z}),

    where both logarithms have arguments with positive real part, and every
    product factor splits into ``log(1 - q^{2k} e^{+-2 pi i u})`` with
    ``|q^{2k} e^{+-2 pi i u}| < 1``.  A reduction ``z -> z - n tau`` adds
    ``-2 pi i n x``.  The result is 0 at ``x = 0`` and continuous in ``x``.

    Parameters
    ----------
    z : complex or array
        Base point(s); broadcast against ``x``.
    x : array
        Offsets in ``[0, 1]``.
    """
    z = np.asarray(z, dtype=complex)
    x = np.asarray(x, dtype=float)
    tau = torus.tau
    n = np.round(z.imag / tau.imag)
    zr = z - n * tau
    zr = zr - np.round(zr.real)
    _check_path(np.atleast_1d(zr), floor)
    u = zr + x
    upper = zr.imag > 0
    s = np.where(upper, 1.0, -1.0)
    sine = (
        -1j * np.pi * s * x
        + np.log1p(-np.exp(2j * np.pi * s * u))
        - np.log1p(-np.exp(2j * np.pi * s * zr))
    )
    q = torus.q
    K = max(1, int(math.ceil(math.log(1e-18) / math.log(abs(q)))) + 1) if q != 0 else 0
    prod = 0j
    for k in range(1, K + 1):
        q2k = q ** (2 * k)
        ep_u, ep_z = np.exp(2j * np.pi * u), np.exp(2j * np.pi * zr)
        prod = prod + (
            np.log1p(-q2k * ep_u)
            + np.log1p(-q2k / ep_u)
            - np.log1p(-q2k * ep_z)
            - np.log1p(-q2k / ep_z)
        )
    return sine + prod - 2j * np.pi * n * x


@dataclass(frozen=True)
class BaseIntegrals:
    """``I0`` and ``Ilog, Ilog', Ilog''`` at the points ``z``."""

    z: np.ndarray
    I0: complex
    Ilog: np.ndarray
    dIlog: np.ndarray
    d2Ilog: np.ndarray
    evaluations: int = 0


def base_integrals(
    params: LameParams,
    torus: Torus,
    z,
    spec: QuadratureSpec | None = None,
) -> BaseIntegrals:
    """All base integrals at the points ``z`` from one vector quadrature.

    ``Ilog'`` and ``Ilog''`` differentiate under the integral sign:
    ``Ilog^{(k)}(z) = int (psi_k(z+x) - psi_k(z)) W(x) dx`` with
    ``psi_k = d^k log theta1``.

    Raises
    ------
    LatticeSingularityError
        If ``z + x`` meets the lattice for some ``x`` in ``[0, 1]``.
    QuadratureError
        If the quadrature does not converge.
    """
    spec = spec or default_quadrature(params)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    nz = len(z)
    # Fail fast (and name the offending x) before any quadrature work.
    log_theta_ratio(z, 0.0, torus)
    psi1 = np.asarray(theta1_log_derivatives(z, torus, 1))
    psi2 = np.asarray(theta1_log_derivatives(z, torus, 2))

    def integrand(x, xc):
        w = weight(x, xc, params, torus)[:, None]
        zx = z[None, :] + x[:, None]
        lr = log_theta_ratio(z[None, :], x[:, None], torus)
        d1 = np.asarray(theta1_log_derivatives(zx, torus, 1)) - psi1
        d2 = np.asarray(theta1_log_derivatives(zx, torus, 2)) - psi2
        return np.concatenate([w, w * lr, w * d1, w * d2], axis=1)

    res = integrate_singular(integrand, spec, complement=True, full_output=True)
    v = np.asarray(res.value)
    return BaseIntegrals(
        z=z,
        I0=complex(v[0]),
        Ilog=v[1 : 1 + nz],
        dIlog=v[1 + nz : 1 + 2 * nz],
        d2Ilog=v[1 + 2 * nz :],
        evaluations=res.evaluations,
    )


def _scalar_or_array(v, like):
    return complex(v[0]) if np.ndim(like) == 0 else v


def gamma_tilde(z, params: LameParams, torus: Torus, spec=None, integrals=None):
    """``exp(pi P0 z / 2 - (alpha0/4) Ilog(z) / I0)``."""
    bi = integrals or base_integrals(params, torus, z, spec)
    val = np.exp(np.pi * params.P0 * bi.z / 2 - params.alpha0 / 4 * bi.Ilog / bi.I0)
    return _scalar_or_array(val, z)


def log_derivatives(z, params: LameParams, torus: Torus, spec=None, integrals=None):
    """``(Gamma~'/Gamma~, Gamma~''/Gamma~)`` in closed form from the integrals."""
    bi = integrals or base_integrals(params, torus, z, spec)
    a = params.alpha0 / 4
    L1 = np.pi * params.P0 / 2 - a * bi.dIlog / bi.I0
    L2 = L1 * L1 - a * bi.d2Ilog / bi.I0
    return _scalar_or_array(L1, z), _scalar_or_array(L2, z)


def accessory_at(z, params: LameParams, torus: Torus, spec=None, integrals=None):
    """``-Gamma~''/Gamma~ + (alpha0/4)(alpha0/4 - 1) wp(z)``."""
    bi = integrals or base_integrals(params, torus, z, spec)
    _, L2 = log_derivatives(bi.z, params, torus, integrals=bi)
    val = -np.asarray(L2) + params.kappa * np.asarray(wp(bi.z, torus))
    return _scalar_or_array(val, z)


@dataclass(frozen=True)
class AccessoryReport:
    """Accessory parameter with its z-independence diagnostics.

    ``accessory`` is the mean over probes, ``spread`` the largest pairwise
    difference of the per-probe values, ``residual`` the largest normalized
    Lamé residual using the mean accessory.  ``valid`` requires
    ``spread < threshold * (1 + |accessory|)``.
    """

    accessory: complex
    probes: tuple
    values: tuple
    spread: float
    residual: float
    threshold: float
    valid: bool
    gamma_values: tuple = field(default=(), repr=False)


def accessory_report(
    params: LameParams,
    torus: Torus,
    spec: QuadratureSpec | None = None,
    probes: Sequence[complex] | None = None,
    threshold: float = 1e-7,
) -> AccessoryReport:
    """Evaluate the accessory at several probes and check the Lamé equation.

    The residual at each probe is
    ``|G'' - kappa wp G + acc G| / (|G''| + |acc G| + 1e-30)``.
    """
    z = probe_points(torus) if probes is None else np.asarray(probes, dtype=complex)
    if len(z) < 3:
        raise ValueError("at least three probe points are required")
    bi = base_integrals(params, torus, z, spec)
    G = np.asarray(gamma_tilde(bi.z, params, torus, integrals=bi))
    _, L2 = log_derivatives(bi.z, params, torus, integrals=bi)
    p = np.asarray(wp(bi.z, torus))
    acc_each = -np.asarray(L2) + params.kappa * p
    acc = complex(np.mean(acc_each))
    spread = float(np.max(np.abs(acc_each[:, None] - acc_each[None, :])))
    G2 = np.asarray(L2) * G
    num = np.abs(G2 - params.kappa * p * G + acc * G)
    den = np.abs(G2) + np.abs(acc * G) + RESIDUAL_EPS
    residual = float(np.max(num / den))
    return AccessoryReport(
        accessory=acc,
        probes=tuple(complex(v) for v in bi.z),
        values=tuple(complex(v) for v in acc_each),
        spread=spread,
        residual=residual,
        threshold=threshold,
        valid=bool(spread < threshold * (1 + abs(acc))),
        gamma_values=tuple(complex(v) for v in G),
    )


def phi_logq_coefficient(params) -> float:
    """Coefficient ``(6 P0^2 - alpha0 (alpha0 + 2)) / 12`` of ``log q``.

    ``params`` is a :class:`LameParams` or a plain ``(alpha0, P0)`` pair; the
    pair form admits the closed endpoint ``alpha0 = 2``.
    """
    a, p0 = (params.alpha0, params.P0) if isinstance(params, LameParams) else params
    return (6 * p0**2 - a * (a + 2)) / 12
