"""Complex root finding by the secant method, with Newton steps when a
derivative is available."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

__all__ = ["RootSpec", "RootResult", "RootError", "find_root"]


class RootError(ArithmeticError):
    """Root finder failure; ``trace`` holds the iterates ``(z, f(z))``."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


@dataclass(frozen=True)
class RootSpec:
    """Settings for :func:`find_root`.

    Parameters
    ----------
    guess : complex
        Starting point.
    step : complex
        Offset of the second secant point from ``guess``.  A relative offset
        is used when ``step`` is zero.
    ftol : float
        Convergence tolerance on ``|f(z)|``.
    xtol : float
        Stagnation tolerance on the step, relative to ``max(1, |z|)``.  A
        stagnated iteration whose residual is still above ``ftol`` is a failure.
    max_iter : int
        Iteration budget.
    """

    guess: complex = 0j
    step: complex = 0j
    ftol: float = 1e-12
    xtol: float = 1e-15
    max_iter: int = 60

    def __post_init__(self):
        if not (self.ftol > 0 and self.xtol > 0):
            raise ValueError("root tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class RootResult:
    root: complex
    residual: float
    iterations: int
    trace: list = field(default_factory=list)


def find_root(
    f: Callable[[complex], complex],
    spec: RootSpec,
    fprime: Callable[[complex], complex] | None = None,
) -> RootResult:
    """Find a zero of an analytic function in the complex plane.

    Parameters
    ----------
    f : callable
        Function of one complex variable.
    spec : RootSpec
        Starting point and tolerances.
    fprime : callable, optional
        Analytic derivative; when supplied, Newton steps are used and the
        secant update serves only as a fallback if ``fprime`` vanishes.

    Returns
    -------
    RootResult

    Raises
    ------
    RootError
        On divergence, stagnation above tolerance, or an exhausted budget.

    Examples
    --------
    >>> r = find_root(lambda z: z * z - 1, RootSpec(guess=1.5))
    >>> abs(r.root - 1) < 1e-12
    True
    """
    z0 = complex(spec.guess)
    f0 = complex(f(z0))
    trace = [(z0, f0)]
    if abs(f0) <= spec.ftol:
        return RootResult(z0, abs(f0), 0, trace)

    step = spec.step if spec.step != 0 else 1e-4 * max(1.0, abs(z0))
    z1 = z0 + step
    f1 = complex(f(z1))
    trace.append((z1, f1))
    # The secant bootstrap point can itself be the answer.
    if abs(f1) <= spec.ftol:
        return RootResult(z1, abs(f1), 1, trace)

    for it in range(1, spec.max_iter + 1):
        dz = None
        if fprime is not None:
            d = complex(fprime(z1))
            if d != 0:
                dz = -f1 / d
        if dz is None:
            denom = f1 - f0
            if denom == 0:
                raise RootError("secant slope vanished", trace)
            dz = -f1 * (z1 - z0) / denom
        z0, f0 = z1, f1
        z1 = z1 + dz
        f1 = complex(f(z1))
        trace.append((z1, f1))
        if f1 != f1 or abs(z1) == float("inf"):
            raise RootError("iteration diverged", trace)
        if abs(f1) <= spec.ftol:
            return RootResult(z1, abs(f1), it, trace)
        if abs(dz) <= spec.xtol * max(1.0, abs(z1)):
            raise RootError(
                f"iteration stagnated with |f| = {abs(f1):.3e} > ftol", trace
            )
    raise RootError(f"no convergence in {spec.max_iter} iterations", trace)
