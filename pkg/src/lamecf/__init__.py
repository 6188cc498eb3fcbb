"""Semi-classical Lamé data on the one-punctured torus.

Subpackages and modules
-----------------------
numerics
    Quadrature, root finding, complex-path ODE integration, fitting, RNG.
elliptic
    Theta functions, Dedekind eta, Weierstrass functions, half-period roots.
lame
    The integral-representation Lamé solution and its accessory parameter.
floquet
    Heun form, Floquet recurrence, continued fractions, eigenvalue oracle.
gmc
    Log-correlated fields, GMC integrals and moment checks.
calogero
    Non-autonomous elliptic Calogero-Moser dynamics.
gammae
    Gamma and double-Gamma shift ratios and semi-classical limits.
cli
    Command-line front end.
"""

__version__ = "0.1.0"
