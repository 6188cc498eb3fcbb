"""Adaptive Dormand-Prince 5(4) integration along paths in the complex plane.

The independent variable ``t`` is complex.  The path from ``t0`` to ``t1`` is
a polygon through optional waypoints; each leg is parametrized by arc length
``s`` so the stepper itself works with a real step size, and the system
actually integrated is ``dy/ds = d * f(t0 + s d, y)`` with ``d`` the unit
direction of the leg.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["OdeSpec", "OdeSolution", "OdeError", "SingularityError", "integrate_ode"]


class SingularityError(ArithmeticError):
    """Raised by right-hand sides evaluated at (or too near) a singular point.

    The integrator treats it as a rejected step and retries with a smaller
    step, so a singular point that is merely grazed is tolerated.
    """


class OdeError(ArithmeticError):
    """Integration failure.

    Attributes
    ----------
    t : complex
        Location of the last successful step.
    y : ndarray
        State at ``t``.
    solution : OdeSolution
        Everything integrated up to the failure.
    """

    def __init__(self, message, t=None, y=None, solution=None):
        super().__init__(message)
        self.t = t
        self.y = y
        self.solution = solution


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [
        71 / 57600,
        0.0,
        -71 / 16695,
        71 / 1920,
        -17253 / 339200,
        22 / 525,
        -1 / 40,
    ]
)
# Shampine's free fourth-order interpolant: y(s0 + theta h) =
# y0 + h * K^T (P @ [theta, theta^2, theta^3, theta^4]).
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


@dataclass(frozen=True)
class OdeSpec:
    """Settings for :func:`integrate_ode`.

    Parameters
    ----------
    t0, t1 : complex
        Start and end of the path.
    y0 : array_like
        Initial complex state.
    rtol, atol : float
        Local error tolerances.
    max_steps : int
        Budget of attempted steps over the whole path.
    dense : bool
        Keep per-step stage data for continuous output.
    waypoints : sequence of complex
        Intermediate vertices of the polygonal path.
    first_step : float, optional
        Initial step in arc length; chosen automatically when omitted.
    """

    t0: complex
    t1: complex
    y0: tuple | np.ndarray
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 100000
    dense: bool = False
    waypoints: Sequence[complex] = ()
    first_step: float | None = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("ODE tolerances must be positive")

    def vertices(self) -> list[complex]:
        return [complex(self.t0), *map(complex, self.waypoints), complex(self.t1)]


@dataclass
class OdeSolution:
    """Accepted steps of an integration.

    ``s`` is the cumulative arc length along the path, ``t`` the complex
    location and ``y`` the state (one row per accepted point).
    """

    s: np.ndarray
    t: np.ndarray
    y: np.ndarray
    vertices: list
    steps: int = 0
    rejected: int = 0
    _dense: list = field(default_factory=list, repr=False)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def t_at(self, s):
        """Complex location at arc length ``s`` along the path."""
        s = np.asarray(s, dtype=float)
        verts = np.asarray(self.vertices, dtype=complex)
        seg = np.abs(np.diff(verts))
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        d = (verts[idx + 1] - verts[idx]) / seg[idx]
        return verts[idx] + (s - cum[idx]) * d

    def __call__(self, s):
        """Dense output at arc length(s) ``s``; requires ``dense=True``."""
        if not self._dense:
            raise ValueError("integration was run without dense output")
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        starts = np.array([d[0] for d in self._dense])
        out = np.empty((len(s_arr), self.y.shape[1]), dtype=complex)
        for i, si in enumerate(s_arr):
            if si < -1e-12 * max(1.0, self.length) or si > self.length * (1 + 1e-12):
                raise ValueError(f"arc length {si} outside [0, {self.length}]")
            k = int(np.clip(np.searchsorted(starts, si, side="right") - 1, 0, len(starts) - 1))
            s0, h, y0, K = self._dense[k]
            theta = (si - s0) / h
            powers = np.array([theta, theta**2, theta**3, theta**4])
            out[i] = y0 + h * (K.T @ (_P @ powers))
        return out[0] if np.ndim(s) == 0 else out


def _rms(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((np.abs(err) / scale) ** 2)))


def _initial_step(fun, s0, y0, f0, rtol, atol, length):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((np.abs(y0) / scale) ** 2))
    d1 = np.sqrt(np.mean((np.abs(f0) / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, length)
    try:
        f1 = fun(s0 + h0, y0 + h0 * f0)
        d2 = np.sqrt(np.mean((np.abs(f1 - f0) / scale) ** 2)) / h0
    except SingularityError:
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, length)


def integrate_ode(rhs: Callable, spec: OdeSpec) -> OdeSolution:
    """Integrate ``dy/dt = rhs(t, y)`` along a polygonal complex path.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y) -> dy/dt`` for complex scalar ``t`` and complex array
        ``y``.  It may raise :class:`SingularityError` near singular points.
    spec : OdeSpec

    Returns
    -------
    OdeSolution

    Raises
    ------
    OdeError
        When the step size underflows (singularity on or next to the path)
        or the step budget is exhausted.  The partial solution is attached.

    Examples
    --------
    >>> sol = integrate_ode(lambda t, y: 1j * y, OdeSpec(0, 1, [1.0]))
    >>> abs(sol.y[-1, 0] - np.exp(1j)) < 1e-9
    True
    """
    verts = spec.vertices()
    y = np.array(spec.y0, dtype=complex).reshape(-1)
    s_list = [0.0]
    t_list = [verts[0]]
    y_list = [y.copy()]
    sol = OdeSolution(np.array(s_list), np.array(t_list), np.array([y]), verts)

    safety, min_fac, max_fac = 0.9, 0.2, 10.0
    beta = 0.04
    alpha = 0.2 - 0.75 * beta
    s_base = 0.0
    attempts = 0
    h = spec.first_step

    def finish():
        sol.s = np.array(s_list)
        sol.t = np.array(t_list)
        sol.y = np.array(y_list)
        return sol

    for a, b in zip(verts[:-1], verts[1:]):
        length = abs(b - a)
        if length == 0:
            continue
        d = (b - a) / length

        def fun(s, yy, a=a, d=d):
            return d * np.asarray(rhs(a + s * d, yy), dtype=complex)

        s = 0.0
        try:
            f0 = fun(0.0, y)
        except SingularityError as exc:
            raise OdeError(f"singular right-hand side at t = {a!r}: {exc}", a, y, finish())
        if h is None:
            h = _initial_step(fun, 0.0, y, f0, spec.rtol, spec.atol, length)
        err_old = 1e-4
        while s < length:
            if attempts >= spec.max_steps:
                raise OdeError(
                    f"step budget {spec.max_steps} exhausted", a + s * d, y, finish()
                )
            attempts += 1
            last = False
            if s + h >= length * (1 - 1e-14):
                h = length - s
                last = True
            h_min = 1e-13 * max(length, abs(s_base + s), 1.0)
            if h < h_min:
                raise OdeError(
                    f"step size underflow near t = {a + s * d!r}", a + s * d, y, finish()
                )
            K = np.empty((7, y.size), dtype=complex)
            K[0] = f0
            try:
                for i in range(1, 7):
                    yi = y + h * (np.asarray(_A[i]) @ K[:i])
                    K[i] = fun(s + _C[i] * h, yi)
            except SingularityError:
                sol.rejected += 1
                h *= 0.25
                continue
            y_new = y + h * (_B @ K)
            err = _rms(h * (_E @ K), y, y_new, spec.rtol, spec.atol)
            if not np.isfinite(err):
                sol.rejected += 1
                h *= 0.25
                continue
            if err <= 1.0:
                if spec.dense:
                    sol._dense.append((s_base + s, h, y.copy(), K.copy()))
                s = length if last else s + h
                y = y_new
                f0 = K[6]
                s_list.append(s_base + s)
                t_list.append(b if last else a + s * d)
                y_list.append(y.copy())
                sol.steps += 1
                fac = safety * err ** (-alpha) * err_old**beta if err > 0 else max_fac
                h *= min(max_fac, max(min_fac, fac))
                err_old = max(err, 1e-4)
            else:
                sol.rejected += 1
                h *= max(min_fac, safety * err ** (-alpha))
        s_base += length
    return finish()
