r"""Theta functions, Dedekind eta and the Weierstrass family for the lattice
``Z + tau Z`` with nome ``q = exp(i pi tau)``.

Sign convention: ``theta1`` carries a leading minus sign,

.. math::

    \theta_1(z) = -2 q^{1/4} \sin(\pi z)
        \prod_{k\ge1} (1-q^{2k})(1 - 2\cos(2\pi z) q^{2k} + q^{4k}),

so ``theta1'(0) = -2 pi eta**3`` and ``theta1`` is negative on ``(0, 1)`` for
real ``q``.  ``theta2`` is defined with a plus sign, so
``theta1(z + 1/2) = -theta2(z)``.

Every function accepts scalars or numpy arrays for ``z``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Torus",
    "HalfPeriodRoots",
    "LatticeSingularityError",
    "theta1",
    "theta2",
    "theta3",
    "theta1_log_derivatives",
    "eta",
    "theta1_prime0",
    "eta1",
    "wp",
    "wp_prime",
    "half_period_roots",
    "LABELINGS",
]

#: Largest admissible ``|q|``.
Q_MAX = 1.0 - 1e-6
#: Default minimal distance from the lattice accepted by singular functions.
LATTICE_FLOOR = 1e-10
_TAIL = 1e-17


class LatticeSingularityError(ArithmeticError):
    """Evaluation point too close to a lattice point; ``distance`` is that gap."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


@dataclass(frozen=True)
class Torus:
    """Modular parameter ``tau`` in the upper half plane.

    ``tau = i*inf`` is accepted and represents the degenerate limit
    ``q = 0``; only :func:`eta` and :func:`half_period_roots` support it.
    """

    tau: complex

    def __post_init__(self):
        tau = complex(self.tau)
        object.__setattr__(self, "tau", tau)
        if not tau.imag > 0:
            raise ValueError(f"Im(tau) must be positive, got tau = {tau}")
        if abs(self.q) >= Q_MAX:
            raise ValueError(f"|q| = {abs(self.q)} too close to 1 for the product formulas")

    @classmethod
    def from_q(cls, q: complex) -> "Torus":
        """Torus with nome ``q`` (principal ``log``; ``q = 0`` is the cusp)."""
        q = complex(q)
        if q == 0:
            return cls(complex(0.0, math.inf))
        if abs(q) >= Q_MAX:
            raise ValueError(f"|q| = {abs(q)} too close to 1 for the product formulas")
        return cls(cmath.log(q) / (1j * math.pi))

    @property
    def is_cusp(self) -> bool:
        return math.isinf(self.tau.imag)

    @property
    def q(self) -> complex:
        if self.is_cusp:
            return 0j
        return cmath.exp(1j * math.pi * self.tau)

    def q_power(self, p: float) -> complex:
        """``q**p`` on the branch ``exp(i pi tau p)`` fixed by ``tau``."""
        if self.is_cusp:
            return 0j
        return cmath.exp(1j * math.pi * self.tau * p)

    def _require_finite(self):
        if self.is_cusp:
            raise ValueError("operation undefined at q = 0")


@dataclass(frozen=True)
class HalfPeriodRoots:
    """Values of ``wp`` at the half periods, in a chosen labeling."""

    e1: complex
    e2: complex
    e3: complex
    g2: complex
    g3: complex
    labeling: str = "standard"

    @property
    def cross_ratio(self) -> complex:
        """``T = (e3 - e1) / (e2 - e1)``."""
        return (self.e3 - self.e1) / (self.e2 - self.e1)


def _product_terms(qa: float, extra: float) -> int:
    """Number of product factors until ``|q|**(2k) * exp(extra) < 1e-17``."""
    if qa == 0:
        return 1
    k = (math.log(_TAIL) - extra) / (2.0 * math.log(qa))
    return max(1, int(math.ceil(k)) + 1)


def _reduce(z, torus: Torus):
    """Split ``z = zr + m + n*tau`` with ``|Im zr| <= Im(tau)/2`` and
    ``-1/2 <= Re zr < 1/2``.  Returns ``(zr, m, n)``."""
    z = np.asarray(z, dtype=complex)
    t = torus.tau
    n = np.round(z.imag / t.imag)
    w = z - n * t
    m = np.round(w.real)
    return w - m, m, n


def theta1(z, torus: Torus):
    """Jacobi ``theta1`` with the minus-sign convention (module docstring)."""
    torus._require_finite()
    zr, m, n = _reduce(z, torus)
    q = torus.q
    K = _product_terms(abs(q), 2 * math.pi * torus.tau.imag / 2)
    k = np.arange(1, K + 1)
    q2k = q ** (2 * k)
    c = np.cos(2 * np.pi * zr)[..., None]
    prod = np.prod((1 - q2k) * (1 - 2 * c * q2k + q2k * q2k), axis=-1)
    base = -2 * torus.q_power(0.25) * np.sin(np.pi * zr) * prod
    # theta1(z + m + n tau) = (-1)^(m+n) q^(-n^2) e^(-2 pi i n z) theta1(z)
    factor = (
        (-1.0) ** (m + n)
        * np.exp(-1j * np.pi * torus.tau * n * n - 2j * np.pi * n * zr)
    )
    return _out(base * factor)


def theta2(z, torus: Torus):
    """``theta2(z) = 2 q^{1/4} cos(pi z) prod (1-q^{2k})(1 + 2cos(2 pi z) q^{2k} + q^{4k})``."""
    torus._require_finite()
    z = np.asarray(z, dtype=complex)
    q = torus.q
    K = _product_terms(abs(q), 2 * math.pi * float(np.max(np.abs(z.imag), initial=0.0)))
    k = np.arange(1, K + 1)
    q2k = q ** (2 * k)
    c = np.cos(2 * np.pi * z)[..., None]
    prod = np.prod((1 - q2k) * (1 + 2 * c * q2k + q2k * q2k), axis=-1)
    return _out(2 * torus.q_power(0.25) * np.cos(np.pi * z) * prod)


def theta3(z, torus: Torus):
    """``theta3(z) = prod (1-q^{2k})(1 + 2cos(2 pi z) q^{2k-1} + q^{4k-2})``."""
    torus._require_finite()
    z = np.asarray(z, dtype=complex)
    q = torus.q
    K = _product_terms(abs(q), 2 * math.pi * float(np.max(np.abs(z.imag), initial=0.0)) + 1) + 1
    k = np.arange(1, K + 1)
    q2k = q ** (2 * k)
    qodd = q ** (2 * k - 1)
    c = np.cos(2 * np.pi * z)[..., None]
    prod = np.prod((1 - q2k) * (1 + 2 * c * qodd + qodd * qodd), axis=-1)
    return _out(prod)


def _out(v):
    v = np.asarray(v)
    return complex(v) if v.ndim == 0 else v


def _check_lattice(zr, floor: float):
    d = np.abs(zr)
    dmin = float(np.min(d)) if d.size else math.inf
    if dmin < floor:
        raise LatticeSingularityError(
            f"point within {dmin:.3e} of the lattice (floor {floor:.1e})", distance=dmin
        )


def _series_terms(qa: float, order: int) -> int:
    """Terms of the log-derivative series.

    After reduction the n-th term is bounded by ``n**order * |q|**n``.
    """
    if qa == 0:
        return 1
    n = 1
    while n**order * qa**n > 1e-17:
        n += 1
    return n


def theta1_log_derivatives(z, torus: Torus, order: int = 1, floor: float = LATTICE_FLOOR):
    r"""``d^k/dz^k log theta1(z)`` for ``k = 1, 2, 3``.

    Uses the Fourier series

    .. math::

        \partial_z \log\theta_1(z) = \pi\cot\pi z
            + 4\pi \sum_{n\ge1} \frac{q^{2n}}{1-q^{2n}} \sin 2\pi n z

    after reducing ``z`` so that ``|Im z| <= Im(tau)/2``; reduction by
    ``n tau`` shifts the first derivative by ``-2 pi i n``.

    Raises
    ------
    LatticeSingularityError
        If ``z`` lies within ``floor`` of a lattice point.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    torus._require_finite()
    zr, _, n_shift = _reduce(z, torus)
    _check_lattice(zr, floor)
    q = torus.q
    N = _series_terms(abs(q), order)
    n = np.arange(1, N + 1)
    q2n = q ** (2 * n)
    coef = q2n / (1 - q2n)
    arg = 2 * np.pi * zr[..., None] * n
    pz = np.pi * zr
    if order == 1:
        head = np.pi / np.tan(pz)
        tail = 4 * np.pi * np.sum(coef * np.sin(arg), axis=-1)
        val = head + tail - 2j * np.pi * n_shift
    elif order == 2:
        head = -((np.pi / np.sin(pz)) ** 2)
        tail = 8 * np.pi**2 * np.sum(n * coef * np.cos(arg), axis=-1)
        val = head + tail
    else:
        s = np.sin(pz)
        head = 2 * np.pi**3 * np.cos(pz) / s**3
        tail = -16 * np.pi**3 * np.sum(n * n * coef * np.sin(arg), axis=-1)
        val = head + tail
    return _out(val)


def eta(torus: Torus) -> complex:
    """Dedekind eta ``q^{1/12} prod (1 - q^{2k})``; zero at the cusp."""
    if torus.is_cusp:
        return 0j
    q = torus.q
    K = _product_terms(abs(q), 0.0)
    k = np.arange(1, K + 1)
    return complex(torus.q_power(1 / 12) * np.prod(1 - q ** (2 * k)))


def theta1_prime0(torus: Torus) -> complex:
    """``theta1'(0) = -2 pi eta**3``."""
    return -2 * math.pi * eta(torus) ** 3


def eta1(torus: Torus) -> complex:
    r"""The constant ``eta_1 = -theta1'''(0) / (6 theta1'(0))``.

    Expanding the product at ``z = 0`` gives
    ``eta_1 = pi^2/6 - 4 pi^2 sum_k q^{2k}/(1-q^{2k})^2``.
    """
    if torus.is_cusp:
        return complex(math.pi**2 / 6)
    q = torus.q
    K = _product_terms(abs(q), 0.0) + 2
    k = np.arange(1, K + 1)
    q2k = q ** (2 * k)
    return complex(math.pi**2 / 6 - 4 * math.pi**2 * np.sum(q2k / (1 - q2k) ** 2))


def wp(z, torus: Torus, floor: float = LATTICE_FLOOR):
    """Weierstrass ``wp(z) = -d^2 log theta1(z) - 2 eta_1``."""
    return _out(-np.asarray(theta1_log_derivatives(z, torus, 2, floor)) - 2 * eta1(torus))


def wp_prime(z, torus: Torus, floor: float = LATTICE_FLOOR):
    """Weierstrass ``wp'(z) = -d^3 log theta1(z)``."""
    return _out(-np.asarray(theta1_log_derivatives(z, torus, 3, floor)))


#: Available assignments of ``(e1, e2, e3)`` to the half periods
#: ``1/2``, ``(1+tau)/2``, ``tau/2``.
LABELINGS = {
    "standard": ("1/2", "(1+tau)/2", "tau/2"),
    "small-T": ("tau/2", "1/2", "(1+tau)/2"),
}


def half_period_roots(torus: Torus, labeling: str = "standard") -> HalfPeriodRoots:
    """Half-period values of ``wp`` and the invariants ``g2, g3``.

    Parameters
    ----------
    torus : Torus
        ``q = 0`` is allowed and returns the limiting values
        ``wp(1/2) = 2 pi^2/3`` and ``wp(tau/2) = wp((1+tau)/2) = -pi^2/3``.
    labeling : {"standard", "small-T"}
        ``"standard"`` puts ``e1, e2, e3`` at ``1/2, (1+tau)/2, tau/2``.
        ``"small-T"`` puts them at ``tau/2, 1/2, (1+tau)/2``, for which the
        cross-ratio ``(e3-e1)/(e2-e1)`` vanishes as ``q -> 0``.
    """
    if labeling not in LABELINGS:
        raise ValueError(f"unknown labeling {labeling!r}; choose from {sorted(LABELINGS)}")
    if torus.is_cusp:
        vals = {
            "1/2": complex(2 * math.pi**2 / 3),
            "(1+tau)/2": complex(-math.pi**2 / 3),
            "tau/2": complex(-math.pi**2 / 3),
        }
    else:
        t = torus.tau
        pts = np.array([0.5, (1 + t) / 2, t / 2])
        w = wp(pts, torus)
        vals = {"1/2": w[0], "(1+tau)/2": w[1], "tau/2": w[2]}
    e1, e2, e3 = (vals[k] for k in LABELINGS[labeling])
    g2 = -4 * (e1 * e2 + e2 * e3 + e3 * e1)
    g3 = 4 * e1 * e2 * e3
    return HalfPeriodRoots(e1, e2, e3, g2, g3, labeling)
