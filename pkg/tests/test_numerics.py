import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from lamecf.numerics import (
    FitError,
    OdeError,
    OdeSpec,
    QuadratureError,
    QuadratureSpec,
    RandomStream,
    RootError,
    RootSpec,
    SingularityError,
    find_root,
    fit_polynomial,
    gaussian_stream,
    integrate_ode,
    integrate_singular,
)


# ------------------------------------------------------------------ quadrature


def test_constant_integrand():
    assert integrate_singular(lambda x: np.ones_like(x), QuadratureSpec(atol=1e-12)) == pytest.approx(1, abs=1e-12)


def test_inverse_sqrt_endpoint():
    spec = QuadratureSpec(endpoint_exponents=(-0.5, 0.0))
    assert abs(integrate_singular(lambda x: x**-0.5, spec) - 2) < 1e-10


def test_sine_power_against_midpoint_oracle():
    # Composite midpoint on the substitution x = s^2 (both ends by symmetry)
    # removes the singularity, so a plain fine midpoint rule is an oracle.
    f = lambda x: np.sin(np.pi * x) ** -0.5
    n = 2_000_000
    s = (np.arange(n) + 0.5) / n * math.sqrt(0.5)
    oracle = 2 * np.sum(f(s * s) * 2 * s) * (math.sqrt(0.5) / n)
    spec = QuadratureSpec(endpoint_exponents=(-0.5, -0.5))
    val = integrate_singular(lambda x, xc: np.sin(np.pi * np.minimum(x, xc)) ** -0.5, spec, complement=True)
    assert abs(val - oracle) < 1e-8
    closed = gamma(0.25) ** 2 / (math.sqrt(2) * math.pi**1.5)
    assert abs(val - closed) < 1e-12


def test_complex_and_vector_integrands():
    spec = QuadratureSpec()
    v = integrate_singular(lambda x: np.stack([np.exp(1j * x), x**2], axis=1), spec)
    assert abs(v[0] - (np.exp(1j) - 1) / 1j) < 1e-12
    assert abs(v[1] - 1 / 3) < 1e-12


def test_composite_method_matches_tanh_sinh():
    f = lambda x: x**-0.3 * (1 - x) ** -0.2 * np.cos(x)
    fc = lambda x, xc: x**-0.3 * xc**-0.2 * np.cos(x)
    a = integrate_singular(fc, QuadratureSpec(endpoint_exponents=(-0.3, -0.2)), complement=True)
    b = integrate_singular(f, QuadratureSpec(method="composite", endpoint_exponents=(-0.3, -0.2)))
    assert abs(a - b) < 1e-9


def test_full_output_and_error_estimate():
    res = integrate_singular(lambda x: np.exp(x), QuadratureSpec(), full_output=True)
    assert res.converged and res.error < 1e-12
    assert abs(res.value - (math.e - 1)) < 1e-13


def test_nonfinite_integrand_raises():
    with pytest.raises(QuadratureError):
        integrate_singular(lambda x: np.where(x > 0.5, np.nan, 1.0), QuadratureSpec())


def test_nonconvergence_reports_estimates():
    spec = QuadratureSpec(max_level=3, atol=1e-16, rtol=1e-16)
    with pytest.raises(QuadratureError) as err:
        integrate_singular(lambda x: np.sin(200 * x), spec)
    assert len(err.value.estimates) >= 2


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_quadrature_is_linear(a, b):
    spec = QuadratureSpec()
    f = lambda x: x**-0.25
    g = lambda x: np.cos(3 * x)
    sp = spec.with_(endpoint_exponents=(-0.25, 0.0))
    lhs = integrate_singular(lambda x: a * f(x) + b * g(x), sp)
    rhs = a * integrate_singular(f, sp) + b * integrate_singular(g, spec)
    assert abs(lhs - rhs) <= 2 * (spec.atol + spec.rtol * (abs(a) + abs(b)) * 2) + 1e-12


def test_tighter_tolerance_never_worse():
    f = lambda x: x**-0.4
    exact = 1 / 0.6
    errs = []
    for tol in (1e-6, 1e-9, 1e-12):
        spec = QuadratureSpec(atol=tol, rtol=tol, endpoint_exponents=(-0.4, 0))
        errs.append(abs(integrate_singular(f, spec) - exact))
    assert errs[1] <= errs[0] + 1e-15 and errs[2] <= errs[1] + 1e-15


# ---------------------------------------------------------------------- roots


def test_root_quadratic():
    assert abs(find_root(lambda z: z * z - 1, RootSpec(1.5)).root - 1) < 1e-12


def test_root_omega_constant_vs_bisection():
    from scipy.optimize import bisect

    oracle = bisect(lambda x: x - math.exp(-x), 0, 1, xtol=1e-15)
    r = find_root(lambda z: z - np.exp(-z), RootSpec(0.5)).root
    assert abs(r - oracle) < 1e-10
    assert abs(oracle - 0.5671432904097838) < 1e-12


def test_root_at_guess_takes_zero_iterations():
    res = find_root(lambda z: z, RootSpec(0.0))
    assert res.root == 0 and res.iterations == 0


def test_newton_with_derivative_and_complex_root():
    res = find_root(lambda z: z * z + 1, RootSpec(0.3 + 0.8j), fprime=lambda z: 2 * z)
    assert abs(res.root - 1j) < 1e-12


def test_root_failure_reports_trace():
    with pytest.raises(RootError) as err:
        find_root(lambda z: z * z + 1, RootSpec(2.0, max_iter=5))
    assert len(err.value.trace) > 0


# ------------------------------------------------------------------------ ode


def test_linear_ode():
    sol = integrate_ode(lambda t, y: 1j * y, OdeSpec(0, 1, [1.0]))
    assert abs(sol.y[-1, 0] - np.exp(1j)) < 1e-9


def test_zero_rhs_keeps_state():
    sol = integrate_ode(lambda t, y: np.zeros_like(y), OdeSpec(0, 2 + 1j, [3.0, -1j]))
    assert np.all(sol.y[-1] == np.array([3.0, -1j]))


def test_harmonic_oscillator_period():
    rhs = lambda t, y: np.array([y[1], -y[0]])
    sol = integrate_ode(rhs, OdeSpec(0, 2 * math.pi, [1.0, 0.0]))
    assert np.max(np.abs(sol.y[-1] - [1, 0])) < 1e-8


def test_complex_path_through_waypoints():
    # y' = y along a polygon: result depends only on the endpoint.
    sol = integrate_ode(lambda t, y: y, OdeSpec(0, 1, [1.0], waypoints=(0.5j, 1 + 0.5j)))
    assert abs(sol.y[-1, 0] - math.e) < 1e-9
    assert np.any(np.isclose(sol.t, 0.5j))


def test_ode_reversal():
    rhs = lambda t, y: np.array([y[1], -np.sin(y[0])])
    spec = OdeSpec(0, 3, [0.5, 0.1])
    fwd = integrate_ode(rhs, spec)
    back = integrate_ode(rhs, OdeSpec(3, 0, fwd.y[-1]))
    assert np.max(np.abs(back.y[-1] - [0.5, 0.1])) < 10 * (spec.rtol + spec.atol) * 10


def test_dense_output_matches_exact():
    sol = integrate_ode(lambda t, y: 1j * y, OdeSpec(0, 3, [1.0], dense=True))
    for s in (0.3, 1.7, 2.9):
        assert abs(sol(s)[0] - np.exp(1j * s)) < 1e-8


def test_singularity_stops_with_error():
    def rhs(t, y):
        if abs(t - 1) < 1e-3:
            raise SingularityError("pole")
        return np.array([1 / (1 - t)])

    with pytest.raises(OdeError) as err:
        integrate_ode(rhs, OdeSpec(0, 2, [0.0]))
    assert err.value.solution is not None
    assert abs(err.value.t - 1) < 1e-2


# -------------------------------------------------------------------- fitting


def test_fit_exact_line():
    assert np.allclose(fit_polynomial([(0, 1), (1, 2), (2, 3)], 1), [1, 1], atol=1e-14)


def test_fit_single_point():
    assert np.allclose(fit_polynomial([(0, 5)], 0), [5])


def test_fit_quadratic():
    pts = [(x, x * x) for x in (-1, 0, 0.5, 2, 3)]
    assert np.allclose(fit_polynomial(pts, 2), [0, 0, 1], atol=1e-12)


def test_fit_rejects_duplicates():
    with pytest.raises(FitError):
        fit_polynomial([(1, 1), (1, 2)], 1)


# --------------------------------------------------------------------- random


def test_empty_stream():
    assert gaussian_stream(RandomStream(1), 0).shape == (0,)


def test_stream_moments():
    x = gaussian_stream(RandomStream(7, 3), 1_000_000)
    assert abs(x.mean()) < 0.005
    assert abs(x.var() - 1) < 0.006


@settings(max_examples=20, deadline=None)
@given(n=st.integers(0, 500), extra=st.integers(0, 500), seed=st.integers(0, 2**63))
def test_stream_prefix_property(n, extra, seed):
    s = RandomStream(seed, 2)
    assert np.array_equal(gaussian_stream(s, n), gaussian_stream(s, n + extra)[:n])


def test_streams_are_independent_by_index_and_child():
    a = gaussian_stream(RandomStream(5, 0), 8)
    b = gaussian_stream(RandomStream(5, 1), 8)
    c = gaussian_stream(RandomStream(5, 0).child(0), 8)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(c, gaussian_stream(RandomStream(5, 0, (0,)), 8))


def test_bad_seed_rejected():
    with pytest.raises(ValueError):
        RandomStream(-1)
