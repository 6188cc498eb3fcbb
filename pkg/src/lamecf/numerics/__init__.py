"""Numerical kernel shared by the rest of the package."""

from .fitting import FitError, fit_polynomial
from .ode import OdeError, OdeSolution, OdeSpec, SingularityError, integrate_ode
from .quadrature import QuadratureError, QuadratureSpec, QuadResult, integrate_singular
from .random import RandomStream, gaussian_stream
from .roots import RootError, RootResult, RootSpec, find_root

__all__ = [
    "FitError",
    "fit_polynomial",
    "OdeError",
    "OdeSolution",
    "OdeSpec",
    "SingularityError",
    "integrate_ode",
    "QuadratureError",
    "QuadratureSpec",
    "QuadResult",
    "integrate_singular",
    "RandomStream",
    "gaussian_stream",
    "RootError",
    "RootResult",
    "RootSpec",
    "find_root",
]
