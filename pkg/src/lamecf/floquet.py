r"""Heun form of the Lamé equation and its Floquet three-term recurrence.

The algebraic form handled here is

.. math::

    y'' + \epsilon\Big(\frac1X + \frac1{X-1} + \frac1{X-T}\Big) y'
        + \frac{ABX - \Lambda}{X(X-1)(X-T)}\, y = 0 .

Substituting ``y = sum_n c_n X^{n+w}`` gives
``A_n c_{n-1} - B_n c_n + T C_n c_{n+1} = 0`` with

* ``A_n = (n+w-1)(n+w-2+3 eps) + AB``
* ``B_n = (T+1)(n+w)(n+w-1+2 eps) + Lambda``
* ``C_n = (n+w+1)(n+w+eps)``.

For ``eps = 1`` these are ``(n+w-1)(n+w+1)+AB``, ``(n+w+1)(n+w)(T+1)+Lambda``
and ``(n+w+1)^2``.

Two parameter conventions are provided by :func:`build_heun`:

``"printed"``
    ``A = -alpha0/4``, ``B = 1 + alpha0/4``, ``eps = 1`` and the accessory
    map ``Lambda = -(acc + AB e1)/(e2 - e1)``.
``"lame"``
    The exact image of ``psi'' = (kappa wp(z) - acc) psi`` under
    ``zeta = wp(z)``, ``X = (zeta - e1)/(e2 - e1)``: ``eps = 1/2``,
    ``AB = -kappa/4`` and ``Lambda = (kappa e1 - acc) / (4 (e2 - e1))``.

The series converges on the annulus between ``|T|`` and 1 (for ``|T| < 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .elliptic import HalfPeriodRoots, Torus, half_period_roots
from .lame import LameParams
from .numerics import RootError, RootSpec, fit_polynomial, find_root

__all__ = [
    "HeunSpectralProblem",
    "FloquetSolution",
    "PoleError",
    "TailConvergenceError",
    "SeriesDivergenceError",
    "recurrence_coefficients",
    "build_heun",
    "lambda_from_lame_accessory",
    "cf_tail",
    "matching",
    "matching_derivative",
    "solve_lambda",
    "solve_w",
    "tridiag_oracle",
    "ode_residual",
    "recurrence_residuals",
    "lambda_qseries",
    "QSeriesResult",
]

DEFAULT_LABELING = "small-T"
DEGENERATE_SHIFT = 1e-8


class PoleError(ArithmeticError):
    """A continued-fraction denominator vanished (``Lambda`` near a resonance)."""


class TailConvergenceError(ArithmeticError):
    """The continued-fraction tail did not settle as the depth was doubled."""


class SeriesDivergenceError(ArithmeticError):
    """The Floquet series does not converge at the requested radius."""


@dataclass(frozen=True)
class HeunSpectralProblem:
    """Data of the Heun spectral problem.

    Parameters
    ----------
    A, B : complex
        Exponent parameters; only the product enters the recurrence.
    T : complex
        Cross-ratio ``(e3 - e1)/(e2 - e1)``.
    w : complex, optional
        Floquet exponent.
    Lambda : complex, optional
        Accessory parameter.
    N : int
        Initial continued-fraction depth (doubled until converged).
    tol : float
        Convergence tolerance of the tails.
    epsilon : float
        Coefficient of the first-derivative term.
    roots : HalfPeriodRoots, optional
        Half-period values used to convert between ``zeta`` and ``X``.
    convention : str
        Which construction produced the problem.
    """

    A: complex
    B: complex
    T: complex
    w: complex | None = None
    Lambda: complex | None = None
    N: int = 64
    tol: float = 1e-14
    epsilon: float = 1.0
    roots: HalfPeriodRoots | None = None
    convention: str = "printed"
    max_depth: int = 1 << 16

    def __post_init__(self):
        if self.N < 8:
            raise ValueError("truncation N must be at least 8")

    @property
    def AB(self) -> complex:
        return self.A * self.B

    def with_(self, **changes) -> "HeunSpectralProblem":
        return replace(self, **changes)

    def x_of_zeta(self, zeta):
        r = self._roots()
        return (np.asarray(zeta) - r.e1) / (r.e2 - r.e1)

    def zeta_of_x(self, X):
        r = self._roots()
        return r.e1 + (r.e2 - r.e1) * np.asarray(X)

    def _roots(self) -> HalfPeriodRoots:
        if self.roots is None:
            raise ValueError("problem carries no half-period roots")
        return self.roots


def recurrence_coefficients(problem: HeunSpectralProblem, n, Lambda=None, w=None):
    """``(A_n, B_n, C_n)`` evaluated exactly for integer(s) ``n``."""
    w = problem.w if w is None else w
    Lam = problem.Lambda if Lambda is None else Lambda
    if w is None or Lam is None:
        raise ValueError("w and Lambda must be set")
    e = problem.epsilon
    m = np.asarray(n) + w
    A_n = (m - 1) * (m - 2 + 3 * e) + problem.AB
    B_n = (problem.T + 1) * m * (m - 1 + 2 * e) + Lam
    C_n = (m + 1) * (m + e)
    return A_n, B_n, C_n


def build_heun(
    params: LameParams,
    torus: Torus,
    convention: str = "printed",
    labeling: str = DEFAULT_LABELING,
    **kwargs,
) -> HeunSpectralProblem:
    """Heun problem (``w`` and ``Lambda`` unset) for Lamé data on ``torus``.

    Parameters
    ----------
    convention : {"printed", "lame"}
        See the module docstring.
    labeling : str
        Half-period labeling passed to :func:`half_period_roots`.  The
        default ``"small-T"`` makes ``T -> 0`` as ``q -> 0``.
    """
    roots = half_period_roots(torus, labeling)
    scale = max(abs(roots.e1), abs(roots.e2), abs(roots.e3))
    if abs(roots.e2 - roots.e1) <= 1e-12 * scale:
        raise ValueError("degenerate torus: e1 and e2 coincide")
    T = roots.cross_ratio
    a0 = params.alpha0
    if convention == "printed":
        A, B, eps = -a0 / 4, 1 + a0 / 4, 1.0
    elif convention == "lame":
        A, B, eps = a0 / 8, 0.5 - a0 / 8, 0.5
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return HeunSpectralProblem(
        A=A, B=B, T=T, epsilon=eps, roots=roots, convention=convention, **kwargs
    )


def lambda_from_lame_accessory(
    acc: complex,
    problem: HeunSpectralProblem,
    roots: HalfPeriodRoots | None = None,
    params: LameParams | None = None,
) -> complex:
    """Map the Lamé accessory to ``Lambda`` for the problem's convention.

    ``"printed"``: ``-(acc + AB e1)/(e2 - e1)``.
    ``"lame"``: ``(kappa e1 - acc)/(4 (e2 - e1))`` with ``kappa = -4 AB``.
    """
    r = roots or problem._roots()
    d = r.e2 - r.e1
    if problem.convention == "lame":
        kappa = params.kappa if params is not None else -4 * problem.AB
        return (kappa * r.e1 - acc) / (4 * d)
    return -(acc + problem.AB * r.e1) / d


def _tail_once(problem, direction, Lambda, w, N, keep=False, derivative=False):
    """One backward pass at depth ``N``; optionally keep ratios and d/dLambda."""
    T = problem.T
    ratios = np.empty(N, dtype=complex) if keep else None
    r = 0j
    dr = 0j
    for n in range(N, 0, -1):
        idx = n if direction == "plus" else -n
        A_n, B_n, C_n = recurrence_coefficients(problem, idx, Lambda, w)
        if direction == "plus":
            num, far = A_n, C_n
        else:
            num, far = C_n, A_n
        den = B_n - T * far * r
        if abs(den) <= 1e-14 * max(abs(B_n), abs(T * far * r), 1.0):
            raise PoleError(
                f"{direction} tail denominator vanished at n = {idx} "
                f"(Lambda = {Lambda!r} is near a resonance)"
            )
        new = num / den
        if derivative:
            # d den / dLambda = 1 - T far dr
            dr = -num * (1 - T * far * dr) / den**2
        r = new
        if keep:
            ratios[n - 1] = r
    return r, dr, ratios


def _depth_loop(problem, direction, Lambda, w, keep=False, derivative=False):
    N = problem.N
    prev, dprev, _ = _tail_once(problem, direction, Lambda, w, N, False, derivative)
    cur = prev
    while True:
        N *= 2
        if N > problem.max_depth:
            raise TailConvergenceError(
                f"{direction} tail not converged at depth {N // 2} "
                f"(last change {abs(cur - prev):.3e})"
            )
        cur, dcur, ratios = _tail_once(problem, direction, Lambda, w, N, keep, derivative)
        if abs(cur - prev) <= problem.tol * max(1.0, abs(cur)):
            return cur, dcur, ratios, N
        prev, dprev = cur, dcur


def _degenerate(problem, w) -> bool:
    """Whether a factor of ``C_n`` vanishes for some integer ``n``."""
    def near_int(v):
        return abs(v - round(v.real)) < 1e-12

    return near_int(complex(w) + 1) or near_int(complex(w) + problem.epsilon)


def cf_tail(problem: HeunSpectralProblem, direction: str, Lambda=None, w=None) -> complex:
    """``u_0 = c_1/c_0`` (``plus``) or ``v_0 = d_1/d_0`` (``minus``).

    Backward recurrence from a zero start at depth ``N``; the depth doubles
    until successive values agree to ``problem.tol``.

    Raises
    ------
    PoleError
        A denominator vanished.
    TailConvergenceError
        No convergence before ``max_depth``.
    """
    if direction not in ("plus", "minus"):
        raise ValueError("direction must be 'plus' or 'minus'")
    Lam = problem.Lambda if Lambda is None else Lambda
    w = problem.w if w is None else w
    return _depth_loop(problem, direction, Lam, w)[0]


def matching(problem: HeunSpectralProblem, Lambda=None, w=None) -> complex:
    """``F = B_0 - T C_0 u_0 - T A_0 v_0``, the ``n = 0`` recurrence row."""
    Lam = problem.Lambda if Lambda is None else Lambda
    w = problem.w if w is None else w
    A0, B0, C0 = recurrence_coefficients(problem, 0, Lam, w)
    T = problem.T
    if T == 0:
        return complex(B0)
    u0 = _depth_loop(problem, "plus", Lam, w)[0]
    v0 = _depth_loop(problem, "minus", Lam, w)[0]
    return complex(B0 - T * C0 * u0 - T * A0 * v0)


def matching_derivative(problem: HeunSpectralProblem, Lambda=None, w=None) -> complex:
    """Analytic ``dF/dLambda`` by differentiating the tail recursions."""
    Lam = problem.Lambda if Lambda is None else Lambda
    w = problem.w if w is None else w
    A0, _, C0 = recurrence_coefficients(problem, 0, Lam, w)
    T = problem.T
    if T == 0:
        return 1 + 0j
    _, du, _, _ = _depth_loop(problem, "plus", Lam, w, derivative=True)
    _, dv, _, _ = _depth_loop(problem, "minus", Lam, w, derivative=True)
    return complex(1 - T * C0 * du - T * A0 * dv)


@dataclass(frozen=True)
class FloquetSolution:
    """Solved Floquet data.

    ``coefficients[k]`` is ``c_{k - N}``, so ``c_0 = coefficients[N]``.
    """

    w: complex
    Lambda: complex
    coefficients: np.ndarray
    N: int
    residual: float
    iterations: int = 0
    flagged: bool = False
    notes: tuple = field(default=())

    def c(self, n: int) -> complex:
        return complex(self.coefficients[n + self.N])

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)


def _reconstruct(problem, Lambda, w):
    """Coefficients ``c_{-N..N}`` from the stored tail ratios, ``c_0 = 1``."""
    T = problem.T
    _, _, u, Nu = _depth_loop(problem, "plus", Lambda, w, keep=True)
    _, _, v, Nv = _depth_loop(problem, "minus", Lambda, w, keep=True)
    N = min(Nu, Nv)
    c = np.zeros(2 * N + 1, dtype=complex)
    c[N] = 1
    for n in range(N):
        # c_{n+1} = u_n c_n and c_{-(n+1)} = T v_n c_{-n}
        c[N + n + 1] = u[n] * c[N + n]
        c[N - n - 1] = T * v[n] * c[N - n]
    return c, N


def _finish(problem, Lambda, w, iterations, flagged, notes):
    c, N = _reconstruct(problem, Lambda, w)
    F = matching(problem, Lambda, w)
    return FloquetSolution(
        w=complex(w),
        Lambda=complex(Lambda),
        coefficients=c,
        N=N,
        residual=abs(F),
        iterations=iterations,
        flagged=flagged,
        notes=tuple(notes),
    )


def _default_lambda_seed(problem, w):
    """A few fixed-point sweeps of ``Lambda = Lambda - F(Lambda)``."""
    e = problem.epsilon
    lam = -(problem.T + 1) * w * (w - 1 + 2 * e)
    if problem.T == 0:
        return lam
    for _ in range(3):
        try:
            lam = lam - matching(problem, lam, w)
        except (PoleError, TailConvergenceError):
            break
    return lam


def solve_lambda(
    problem: HeunSpectralProblem,
    guess: complex | None = None,
    ftol: float = 1e-11,
    newton: bool = False,
) -> FloquetSolution:
    """Solve ``F(Lambda) = 0`` at fixed ``w``.

    Parameters
    ----------
    guess : complex, optional
        Starting value.  Defaults to the ``T = 0`` value refined by a few
        fixed-point sweeps.
    ftol : float
        Tolerance on ``|F|`` relative to ``max(1, |B_0 - Lambda|)``.
    newton : bool
        Use the analytic derivative instead of secant steps.
    """
    w = problem.w
    if w is None:
        raise ValueError("w must be set")
    notes = []
    flagged = False
    if _degenerate(problem, w):
        flagged = True
        notes.append(f"degenerate w; averaged solves at w +- {DEGENERATE_SHIFT:g}")
        sols = [
            solve_lambda(problem.with_(w=w + s), guess, ftol, newton)
            for s in (-DEGENERATE_SHIFT, DEGENERATE_SHIFT)
        ]
        lam = 0.5 * (sols[0].Lambda + sols[1].Lambda)
        return replace(sols[1], w=complex(w), Lambda=lam, flagged=True, notes=tuple(notes))
    seed = _default_lambda_seed(problem, w) if guess is None else guess
    scale = max(1.0, abs((problem.T + 1) * w * (w - 1 + 2 * problem.epsilon)))
    spec = RootSpec(guess=seed, ftol=ftol * scale, max_iter=80)
    fprime = (lambda L: matching_derivative(problem, L, w)) if newton else None
    res = find_root(lambda L: matching(problem, L, w), spec, fprime)
    return _finish(problem, res.root, w, res.iterations, flagged, notes)


def solve_w(
    problem: HeunSpectralProblem,
    guess: complex | None = None,
    ftol: float = 1e-11,
) -> FloquetSolution:
    """Solve ``F(w) = 0`` at fixed ``Lambda``.

    The default seed solves the ``T = 0`` relation
    ``w (w - 1 + 2 eps) + Lambda = 0`` for the root with the larger real part.
    """
    Lam = problem.Lambda
    if Lam is None:
        raise ValueError("Lambda must be set")
    e = problem.epsilon
    if guess is None:
        b = 2 * e - 1
        guess = (-b + np.sqrt(complex(b * b - 4 * Lam))) / 2
    scale = max(1.0, abs(Lam))
    spec = RootSpec(guess=guess, ftol=ftol * scale, max_iter=80)
    res = find_root(lambda w: matching(problem, Lam, w), spec)
    w = res.root
    notes = []
    flagged = _degenerate(problem, w)
    if flagged:
        notes.append("root lies at a degenerate Floquet exponent")
    return _finish(problem, Lam, w, res.iterations, flagged, notes)


def tridiag_oracle(problem: HeunSpectralProblem, N: int = 40) -> np.ndarray:
    r"""Eigenvalues of the truncated recurrence, ``M c = Lambda c``.

    Row ``n`` (``-N <= n <= N``) reads
    ``A_n c_{n-1} - D_n c_n + T C_n c_{n+1} = Lambda c_n`` where
    ``D_n = B_n - Lambda = (T+1)(n+w)(n+w-1+2 eps)``.
    """
    if N > 200:
        raise ValueError("N above 200 is outside the dense eigensolver's intended scale")
    n = np.arange(-N, N + 1)
    A_n, B_n, C_n = recurrence_coefficients(problem, n, 0.0)
    M = np.diag(-B_n) + np.diag(A_n[1:], -1) + np.diag(problem.T * C_n[:-1], 1)
    vals = np.linalg.eigvals(M)
    return vals[np.argsort(np.abs(vals))]


def recurrence_residuals(solution: FloquetSolution, problem: HeunSpectralProblem) -> np.ndarray:
    """Relative residual of every interior recurrence row."""
    c = solution.coefficients
    n = solution.indices[1:-1]
    A_n, B_n, C_n = recurrence_coefficients(problem, n, solution.Lambda, solution.w)
    lo, mid, hi = c[:-2], c[1:-1], c[2:]
    r = np.abs(A_n * lo - B_n * mid + problem.T * C_n * hi)
    scale = np.maximum.reduce([np.abs(A_n * lo), np.abs(B_n * mid), np.abs(problem.T * C_n * hi)])
    return r / np.where(scale > 0, scale, 1.0)


def default_radius(problem: HeunSpectralProblem) -> float:
    """Geometric mean ``sqrt(|T|)`` of the annulus radii ``|T|`` and 1.

    At ``T = 0`` the minus side vanishes and the series converges on the
    punctured unit disk; ``1/2`` is used.
    """
    t = abs(problem.T)
    return math.sqrt(t) if t > 0 else 0.5


def ode_residual(
    solution: FloquetSolution,
    problem: HeunSpectralProblem,
    r: float | None = None,
    points: int = 16,
    decay_tol: float = 1e-12,
) -> float:
    """Largest normalized residual of the Heun operator on ``|X| = r``.

    The truncated series ``sum c_n X^{n+w}`` and its first two derivatives
    are evaluated term by term on the principal branch of ``X^w``; each
    residual is divided by the sum of the magnitudes of the three terms of
    the operator.

    Raises
    ------
    SeriesDivergenceError
        If the end terms ``|c_{+-N}| r^{+-N}`` are not below ``decay_tol``
        relative to the largest term, i.e. ``r`` is outside the annulus of
        convergence or too close to its edge.
    """
    r = default_radius(problem) if r is None else float(r)
    if not r > 0:
        raise ValueError("radius must be positive")
    c = solution.coefficients
    n = solution.indices
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        logmag = np.log(np.abs(c) + 1e-320) + n * math.log(r)
    peak = float(np.nanmax(logmag))
    ends = max(logmag[0], logmag[-1])
    if not np.isfinite(peak) or ends - peak > math.log(decay_tol):
        raise SeriesDivergenceError(
            f"Floquet series not converged at |X| = {r:g}: end terms are "
            f"{math.exp(min(ends - peak, 700)):.3e} of the largest; try a radius "
            f"between |T| = {abs(problem.T):.4g} and 1"
        )
    theta = 2 * np.pi * (np.arange(points) + 0.5) / points
    X = r * np.exp(1j * theta)
    logX = np.log(X)
    m = n[None, :] + solution.w
    # Terms scaled by exp(-peak) to keep magnitudes moderate.
    base = c[None, :] * np.exp(m * logX[:, None] - peak)
    y = base.sum(axis=1)
    y1 = (base * m).sum(axis=1) / X
    y2 = (base * m * (m - 1)).sum(axis=1) / X**2
    T = problem.T
    e = problem.epsilon
    t1 = e * (1 / X + 1 / (X - 1) + 1 / (X - T)) * y1
    t0 = (problem.AB * X - solution.Lambda) / (X * (X - 1) * (X - T)) * y
    res = np.abs(y2 + t1 + t0) / (np.abs(y2) + np.abs(t1) + np.abs(t0))
    return float(np.max(res))


@dataclass(frozen=True)
class QSeriesResult:
    """Polynomial fit of ``Lambda(q)`` with its leave-one-out spread."""

    coefficients: np.ndarray
    loo_variation: float
    flagged: bool
    q: tuple
    Lambda: tuple


def lambda_qseries(
    params: LameParams,
    w: complex,
    q_grid,
    degree: int,
    tol: float = 1e-6,
    convention: str = "printed",
    labeling: str = DEFAULT_LABELING,
) -> QSeriesResult:
    """Fit ``Lambda(q) = sum Lambda_n q^n`` over a grid of small nomes.

    The root at each ``q`` is continued from the previous grid point, starting
    from the ``T = 0`` value ``-w(w - 1 + 2 eps)``.  The fit is flagged when
    removing any single point moves some coefficient by more than ``10 tol``.
    """
    q_grid = [float(q) for q in q_grid]
    if len(q_grid) < degree + 2:
        raise ValueError("need at least degree + 2 grid points")
    lams = []
    guess = None
    for q in sorted(q_grid):
        prob = build_heun(params, Torus.from_q(q), convention, labeling).with_(w=w)
        sol = solve_lambda(prob, guess)
        lams.append(sol.Lambda)
        guess = sol.Lambda
    pts = list(zip(sorted(q_grid), lams))
    coef = fit_polynomial(pts, degree)
    variation = 0.0
    for i in range(len(pts)):
        sub = pts[:i] + pts[i + 1 :]
        variation = max(variation, float(np.max(np.abs(fit_polynomial(sub, degree) - coef))))
    return QSeriesResult(
        coefficients=coef,
        loo_variation=variation,
        flagged=variation > 10 * tol,
        q=tuple(sorted(q_grid)),
        Lambda=tuple(complex(v) for v in lams),
    )
