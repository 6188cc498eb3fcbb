r"""Log-correlated fields on the circle, GMC integrals and moment checks.

Fields
------
The cutoff field is

.. math::

    \tilde Y_N(x) = \sum_{n=1}^N \sqrt{2/n}\,(a_n\cos 2\pi n x + b_n\sin 2\pi n x)

and the ``q``-field adds

.. math::

    F(x; q) = 2\sum_{n,m\ge1} \frac{q^{nm}}{\sqrt n}
        (a_{n,m}\cos 2\pi n x + b_{n,m}\sin 2\pi n x),

truncated to the pairs with ``|q|^{nm} >= 1e-16``.

Draw order (wire contract)
--------------------------
One realization consumes, in this order, ``a_1..a_N``, ``b_1..b_N``, then
``a_{n,m}`` for all retained pairs in row-major order (``n`` outer, ``m``
inner), then ``b_{n,m}`` in the same order.  Consecutive realizations use
consecutive blocks of the stream.

GMC integrals
-------------
``int_0^1 f(x) exp(gamma/2 Y(x) - gamma^2/8 E[Y^2]) dx`` is computed by
product-midpoint integration: the interval is split into ``M`` cells, the
singular weight ``f`` is integrated exactly over each cell and the smooth
field is sampled at cell midpoints (by a real FFT).  Because every cell term
has unit-mean exponential, the estimator of the first moment is unbiased.
For real ``q`` the weight uses ``-theta1(x) > 0`` (and ``2 sin(pi x)`` for
the ``q``-independent field), so all samples are real.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .elliptic import Torus, eta, theta1, theta1_prime0
from .numerics import QuadratureSpec, RandomStream, integrate_singular

__all__ = [
    "FieldConfig",
    "MomentCheck",
    "mode_pairs",
    "field_variance",
    "sample_field",
    "sample_fields",
    "covariance",
    "truncated_covariance",
    "WeightedGrid",
    "weighted_grid",
    "gmc_integral",
    "gmc_samples",
    "moment_oracle",
    "moment_check",
    "df_constant",
    "block_estimate",
    "SingularKernelError",
]

Q_CUTOFF = 1e-16


class SingularKernelError(ArithmeticError):
    """The covariance kernel was evaluated on its diagonal."""


@dataclass(frozen=True)
class FieldConfig:
    """Mode content and randomness of a sampled field.

    Parameters
    ----------
    gamma : float
        Coupling in ``(0, 2)``.
    N : int
        Number of modes of the cutoff field.
    torus : Torus or None
        ``None`` selects the ``q``-independent field; otherwise ``tau`` must
        be purely imaginary (real nome).
    stream : RandomStream
    q_cutoff : float
        Pairs ``(n, m)`` with ``|q|^{nm} < q_cutoff`` are dropped from ``F``.
    """

    gamma: float
    N: int
    torus: Torus | None = None
    stream: RandomStream = field(default_factory=lambda: RandomStream(0))
    q_cutoff: float = Q_CUTOFF

    def __post_init__(self):
        if not (0 < self.gamma < 2):
            raise ValueError("gamma must lie in (0, 2)")
        if self.N < 0:
            raise ValueError("N must be non-negative")
        if self.torus is not None:
            q = self.torus.q
            if abs(q.imag) > 1e-14 * max(1.0, abs(q)) or not (0 < q.real < 1):
                raise ValueError("the q-field requires tau on the imaginary axis (0 < q < 1)")

    @property
    def q(self) -> float:
        return 0.0 if self.torus is None else float(self.torus.q.real)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return mode_pairs(self.q, self.q_cutoff)

    @property
    def block_size(self) -> int:
        """Gaussian draws consumed by one realization."""
        return 2 * self.N + 2 * len(self.pairs)


def mode_pairs(q: float, cutoff: float = Q_CUTOFF) -> list[tuple[int, int]]:
    """Row-major list of ``(n, m)`` with ``q**(n m) >= cutoff``."""
    if q <= 0:
        return []
    limit = math.log(cutoff) / math.log(q)
    out = []
    n = 1
    while n <= limit:
        m = 1
        while n * m <= limit:
            out.append((n, m))
            m += 1
        n += 1
    return out


def field_variance(config: FieldConfig) -> float:
    """``E[Y_N(x)^2] = 2 H_N - 4 log|q^{-1/12} eta(q)|`` (second term for the q-field)."""
    var = 2.0 * float(np.sum(1.0 / np.arange(1, config.N + 1)))
    if config.torus is not None:
        var += -4.0 * math.log(abs(config.torus.q_power(-1 / 12) * eta(config.torus)))
    return var


def _spectrum(config: FieldConfig, draws: np.ndarray) -> np.ndarray:
    """Complex mode coefficients ``C_n`` with ``Y(x) = Re sum C_n e^{2 pi i n x}``.

    ``draws`` has shape ``(count, block_size)``; the result has shape
    ``(count, K + 1)`` with ``K`` the highest frequency present.
    """
    N = config.N
    pairs = config.pairs
    kmax = max([N] + [n for n, _ in pairs])
    count = draws.shape[0]
    C = np.zeros((count, kmax + 1), dtype=complex)
    if N:
        n = np.arange(1, N + 1)
        amp = np.sqrt(2.0 / n)
        C[:, 1 : N + 1] = amp * (draws[:, :N] - 1j * draws[:, N : 2 * N])
    if pairs:
        P = len(pairs)
        a = draws[:, 2 * N : 2 * N + P]
        b = draws[:, 2 * N + P : 2 * N + 2 * P]
        ns = np.array([p[0] for p in pairs])
        ms = np.array([p[1] for p in pairs])
        coef = 2.0 * config.q ** (ns * ms) / np.sqrt(ns)
        contrib = coef * (a - 1j * b)
        # Accumulate each pair into its frequency column.
        for j, nn in enumerate(ns):
            C[:, nn] += contrib[:, j]
    return C


def _evaluate_spectrum(C: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = np.arange(C.shape[1])
    return np.real(C @ np.exp(2j * np.pi * np.outer(n, x)))


def sample_fields(config: FieldConfig, x, count: int, offset: int = 0) -> np.ndarray:
    """Realizations ``offset .. offset+count-1`` of the field on the grid ``x``.

    Returns an array of shape ``(count, len(x))``.
    """
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("grid points must lie in [0, 1]")
    B = config.block_size
    if B == 0:
        return np.zeros((count, len(x)))
    gen = config.stream.generator()
    if offset:
        gen.standard_normal(offset * B)
    draws = gen.standard_normal(count * B).reshape(count, B)
    return _evaluate_spectrum(_spectrum(config, draws), x)


def sample_field(config: FieldConfig, x) -> np.ndarray:
    """The first realization of the field on the grid ``x``."""
    return sample_fields(config, x, 1)[0]


def covariance(x, y, torus: Torus | None = None) -> float:
    """Exact covariance kernel of the limiting field.

    ``-2 log|e^{2 pi i x} - e^{2 pi i y}|`` for the ``q``-independent field,
    ``-2 log|theta1(x-y)| + 2 log|q^{1/6} eta(q)|`` for the ``q``-field.
    """
    d = float(x) - float(y)
    if abs(d - round(d)) < 1e-15:
        raise SingularKernelError(f"covariance kernel is singular at x = y (mod 1): {x}, {y}")
    if torus is None:
        return -2.0 * math.log(abs(2.0 * math.sin(math.pi * d)))
    return -2.0 * math.log(abs(theta1(d, torus))) + 2.0 * math.log(
        abs(torus.q_power(1 / 6) * eta(torus))
    )


def truncated_covariance(d, config: FieldConfig) -> np.ndarray:
    """Covariance of the sampled (finite-mode) field at separations ``d``."""
    d = np.asarray(d, dtype=float)
    n = np.arange(1, config.N + 1)
    out = np.sum((2.0 / n) * np.cos(2 * np.pi * np.multiply.outer(d, n)), axis=-1)
    for nn, m in config.pairs:
        out = out + 4.0 * config.q ** (2 * nn * m) / nn * np.cos(2 * np.pi * nn * d)
    return out


def _weight_fn(alpha: float, gamma: float, P: float, torus: Torus | None) -> Callable:
    """``f(x) = base(x)^{-alpha gamma/2} e^{pi gamma P x}`` with positive base."""
    expo = -alpha * gamma / 2

    def f(x, xc):
        near = np.where(x <= 0.5, x, xc)
        if torus is None:
            base = 2.0 * np.sin(np.pi * near)
        else:
            base = -np.real(np.asarray(theta1(near, torus)))
        return base**expo * np.exp(np.pi * gamma * P * x)

    return f


@dataclass(frozen=True)
class WeightedGrid:
    """Cell midpoints ``x`` and exact cell integrals ``w`` of the weight."""

    x: np.ndarray
    w: np.ndarray
    total: float


def weighted_grid(
    alpha: float, gamma: float, P: float, torus: Torus | None, cells: int
) -> WeightedGrid:
    """Product-integration weights on ``cells`` uniform cells.

    Interior cells use 8-point Gauss-Legendre; the two end cells, which
    contain the power-law singularity, use tanh-sinh.
    """
    expo = -alpha * gamma / 2
    if not expo > -1:
        raise ValueError("weight is not integrable (need alpha*gamma/2 < 1)")
    f = _weight_fn(alpha, gamma, P, torus)
    h = 1.0 / cells
    edges = np.arange(cells + 1) * h
    gx, gw = np.polynomial.legendre.leggauss(8)
    mid = (edges[:-1] + edges[1:]) / 2
    xs = mid[1:-1, None] + (h / 2) * gx[None, :]
    vals = f(xs.ravel(), 1.0 - xs.ravel()).reshape(xs.shape)
    w = np.empty(cells)
    w[1:-1] = (h / 2) * vals @ gw
    spec = QuadratureSpec(atol=1e-17, rtol=1e-14, endpoint_exponents=(expo, 0.0))
    w[0] = h * integrate_singular(lambda s, sc: f(h * s, 1.0 - h * s), spec, complement=True).real
    spec_r = QuadratureSpec(atol=1e-17, rtol=1e-14, endpoint_exponents=(0.0, expo))
    w[-1] = h * integrate_singular(
        lambda s, sc: f(1.0 - h * sc, h * sc), spec_r, complement=True
    ).real
    return WeightedGrid(mid, w, float(np.sum(w)))


def _real_fft_field(C: np.ndarray, M: int) -> np.ndarray:
    """Field at cell midpoints ``(j + 1/2)/M`` from the mode spectrum."""
    K = C.shape[1] - 1
    if 2 * K >= M:
        raise ValueError(f"{M} cells cannot resolve {K} modes; use more than {2 * K}")
    X = np.zeros((C.shape[0], M // 2 + 1), dtype=complex)
    n = np.arange(K + 1)
    X[:, : K + 1] = (M / 2) * C * np.exp(1j * np.pi * n / M)
    return np.fft.irfft(X, n=M, axis=1)


def gmc_samples(
    config: FieldConfig,
    alpha: float,
    P: float,
    count: int,
    cells: int | None = None,
    offset: int = 0,
    grid: WeightedGrid | None = None,
    chunk: int = 256,
) -> np.ndarray:
    """``count`` consecutive samples of the renormalized GMC integral.

    Parameters
    ----------
    alpha, P : float
        Weight ``theta1^{-alpha gamma/2} e^{pi gamma P x}`` at finite ``gamma``.
    cells : int
        Number of product-integration cells (power of two recommended);
        defaults to the smallest power of two above ``4 N``.
    """
    g = config.gamma
    if cells is None:
        cells = 1 << max(6, int(math.ceil(math.log2(4 * max(config.N, 1) + 1))))
    grid = grid or weighted_grid(alpha, g, P, config.torus, cells)
    shift = g * g / 8 * field_variance(config)
    B = config.block_size
    gen = config.stream.generator()
    if offset and B:
        gen.standard_normal(offset * B)
    out = np.empty(count)
    done = 0
    while done < count:
        k = min(chunk, count - done)
        if B:
            draws = gen.standard_normal(k * B).reshape(k, B)
            Y = _real_fft_field(_spectrum(config, draws), cells)
        else:
            Y = np.zeros((k, cells))
        out[done : done + k] = np.exp(g / 2 * Y - shift) @ grid.w
        done += k
    return out


def gmc_integral(config: FieldConfig, alpha: float, P: float, cells: int | None = None) -> float:
    """One sample (the stream's first) of the GMC integral."""
    return float(gmc_samples(config, alpha, P, 1, cells)[0])


@dataclass(frozen=True)
class MomentCheck:
    """Monte Carlo moment against its quadrature oracle."""

    order: int
    estimate: float
    stderr: float
    oracle: float
    z: float
    samples: int
    flagged: bool
    notes: tuple = ()


def moment_oracle(
    order: int, gamma: float, P: float, torus: Torus | None, alpha: float | None = None
) -> float:
    r"""``E[(int f e^{gamma Y/2})^order]`` by iterated quadrature.

    For ``order = 2`` this is
    ``int int f(x) f(y) exp(gamma^2/4 * cov(x, y)) dx dy`` with the exact
    kernel of :func:`covariance`; ``alpha`` defaults to ``-order * gamma``.
    """
    alpha = -order * gamma if alpha is None else alpha
    expo = -alpha * gamma / 2
    f = _weight_fn(alpha, gamma, P, torus)
    spec = QuadratureSpec(atol=1e-15, rtol=1e-12, endpoint_exponents=(expo, expo))
    if order == 1:
        return float(integrate_singular(f, spec, complement=True).real)
    if order != 2:
        raise ValueError("only orders 1 and 2 have a quadrature oracle")
    c = gamma * gamma / 4
    if torus is None:
        const = 1.0

        def kern(d):
            return (2.0 * np.sin(np.pi * d)) ** (-2 * c)

    else:
        const = abs(torus.q_power(1 / 6) * eta(torus)) ** (2 * c)

        def kern(d):
            return np.abs(np.real(np.asarray(theta1(d, torus)))) ** (-2 * c)

    inner_spec = QuadratureSpec(atol=1e-15, rtol=1e-12, endpoint_exponents=(-2 * c, -2 * c))

    def outer(x, xc):
        def inner(s, sc):
            # y = x s on [0, x] (x - y = x sc); y = x + xc s on [x, 1].
            left = x[None, :] * f(x[None, :] * s[:, None], 1 - x[None, :] * s[:, None]) * kern(
                x[None, :] * sc[:, None]
            )
            yr = x[None, :] + xc[None, :] * s[:, None]
            right = xc[None, :] * f(yr, xc[None, :] * sc[:, None]) * kern(xc[None, :] * s[:, None])
            return np.concatenate([left, right], axis=1)

        v = np.real(integrate_singular(inner, inner_spec, complement=True))
        n = len(x)
        return f(x, xc) * (v[:n] + v[n:])

    return float(const * np.real(integrate_singular(outer, spec, complement=True)))


def _shard(args):
    config, alpha, P, count, cells, order = args
    vals = gmc_samples(config, alpha, P, count, cells) ** order
    mean = float(np.mean(vals))
    m2 = float(np.sum((vals - mean) ** 2))
    return count, mean, m2


def _merge(stats):
    """Chan et al. pairwise merge of ``(n, mean, M2)`` triples, in order."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def moment_check(
    order: int,
    gamma: float,
    P: float,
    torus: Torus | None,
    samples: int,
    seed: int = 0,
    N: int = 2000,
    cells: int | None = None,
    shards: int = 16,
    jobs: int = 1,
    alpha: float | None = None,
    stream_index: int = 0,
) -> MomentCheck:
    """Monte Carlo ``E[I^order]`` versus :func:`moment_oracle`.

    Shard ``k`` uses the sub-stream ``RandomStream(seed, stream_index).child(k)``;
    shard statistics are merged in shard order, so the result does not
    depend on ``jobs``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    alpha = -order * gamma if alpha is None else alpha
    base = RandomStream(seed, stream_index)
    sizes = [samples // shards + (1 if k < samples % shards else 0) for k in range(shards)]
    tasks = [
        (FieldConfig(gamma, N, torus, base.child(k)), alpha, P, sizes[k], cells, order)
        for k in range(shards)
        if sizes[k]
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            stats = list(ex.map(_shard, tasks))
    else:
        stats = [_shard(t) for t in tasks]
    n, mean, m2 = _merge(stats)
    se = math.sqrt(m2 / (n - 1) / n) if n > 1 else math.inf
    oracle = moment_oracle(order, gamma, P, torus, alpha)
    z = abs(mean - oracle) / se if se > 0 else math.inf
    flagged = bool(se / abs(mean) > 0.2) if mean else True
    notes = ("standard error above 20% of the mean; more samples needed",) if flagged else ()
    return MomentCheck(order, mean, se, oracle, z, n, flagged, notes)


def df_constant(N: int, gamma: float, P: float, torus: Torus) -> complex:
    r"""The Gamma-function constant of the integer-moment (Selberg-type) formula.

    .. math::

        C = \frac{e^{N\gamma P\pi/2}}{\Gamma(1-\gamma^2/8)^N}
            \Big(\frac{\theta_1'(0)}{2}\Big)^{N(N+1)\gamma^2/8}
            \prod_{k=1}^N \frac{\Gamma(1-k\gamma^2/8)\,\Gamma(1+(2N+1-k)\gamma^2/8)}
            {\Gamma(1+k\gamma^2/8+i\gamma P/2)\,\Gamma(1+k\gamma^2/8-i\gamma P/2)}

    evaluated in log space with principal branches; ``theta1'(0) < 0`` for
    real ``q`` so the power is taken on the principal branch of its log.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    if N == 0:
        return 1 + 0j
    s = gamma * gamma / 8

    def lg(z):
        z = complex(z)
        if z.imag == 0 and z.real <= 0 and z.real == round(z.real):
            raise ZeroDivisionError(f"Gamma pole at {z.real:g}")
        return complex(special.loggamma(z))

    total = N * gamma * P * math.pi / 2 - N * lg(1 - s)
    total += N * (N + 1) * s * np.log(complex(theta1_prime0(torus)) / 2)
    for k in range(1, N + 1):
        total += lg(1 - k * s) + lg(1 + (2 * N + 1 - k) * s)
        total -= lg(1 + k * s + 0.5j * gamma * P) + lg(1 + k * s - 0.5j * gamma * P)
    return complex(np.exp(total))


def block_estimate(
    order: int,
    gamma: float,
    P: float,
    torus: Torus,
    samples: int,
    seed: int = 0,
    N: int = 1000,
    cells: int | None = None,
) -> tuple[float, float]:
    r"""Best-effort estimate of the normalized block at ``-alpha/gamma = order``.

    Ratio of the ``q``-field moment to the normalization built from the
    ``q``-independent field,
    ``q^{(alpha gamma/2 + alpha^2/2 - 1)/12} eta^{alpha^2 + 1 - alpha gamma/2}``
    times its moment.  Returns ``(estimate, standard error)`` with the error
    propagated to first order from the two independent Monte Carlo runs.
    """
    alpha = -order * gamma
    num = moment_check(order, gamma, P, torus, samples, seed, N, cells, stream_index=1)
    den = moment_check(order, gamma, P, None, samples, seed, N, cells, stream_index=2)
    a = alpha
    pref = torus.q_power((a * gamma / 2 + a * a / 2 - 1) / 12) * eta(torus) ** (
        a * a + 1 - a * gamma / 2
    )
    # theta1 = -|theta1| on (0,1); both moments use positive bases, and the
    # product q^{1/4}-type phases are real for real q.
    Z = abs(pref) * den.estimate
    est = num.estimate / Z
    rel = math.hypot(num.stderr / num.estimate, den.stderr / den.estimate)
    return est, abs(est) * rel
