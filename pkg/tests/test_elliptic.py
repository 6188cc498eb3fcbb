import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamecf.elliptic import (
    LatticeSingularityError,
    Torus,
    eta,
    eta1,
    half_period_roots,
    theta1,
    theta1_log_derivatives,
    theta1_prime0,
    theta2,
    theta3,
    wp,
    wp_prime,
)

nomes = st.floats(0.01, 0.4)
unit = st.floats(0.05, 0.95)


def _point(T, a, b):
    return a + b * T.tau


def mp_theta(k, z, T, d=0):
    """mpmath Jacobi theta in the variable pi z (derivatives in z)."""
    return complex(mp.jtheta(k, mp.pi * mp.mpc(z), mp.mpc(T.q), d)) * math.pi**d


def mp_wp(z, T):
    """Independent oracle: wp = e1 + (pi th3 th4 th2(pi z)/th1(pi z))^2."""
    q = mp.mpc(T.q)
    v = mp.pi * mp.mpc(z)
    t3, t4 = mp.jtheta(3, 0, q), mp.jtheta(4, 0, q)
    e1 = mp.pi**2 / 3 * (t3**4 + t4**4)
    return complex(e1 + (mp.pi * t3 * t4 * mp.jtheta(2, v, q) / mp.jtheta(1, v, q)) ** 2)


# ------------------------------------------------------------------- thetas


def test_theta1_zero():
    assert theta1(0.0, Torus.from_q(0.2)) == 0


def test_theta1_shift_by_one():
    T = Torus.from_q(0.2)
    z = 0.3 + 0.1j
    assert abs(theta1(z + 1, T) + theta1(z, T)) < 1e-12


def test_theta1_small_q_leading_term():
    T = Torus.from_q(0.01)
    lead = -2 * 0.01**0.25 * math.sin(0.3 * math.pi)
    assert abs(theta1(0.3, T) / lead - 1) < 3e-4


@settings(max_examples=30, deadline=None)
@given(q=nomes, a=unit, b=unit)
def test_thetas_match_mpmath(q, a, b):
    T = Torus.from_q(q)
    z = _point(T, a - 0.5, b - 0.5)
    # This package's theta1 carries the opposite overall sign.
    assert abs(theta1(z, T) + mp_theta(1, z, T)) < 1e-12 * max(1, abs(mp_theta(1, z, T)))
    assert abs(theta2(z, T) - mp_theta(2, z, T)) < 1e-12 * max(1, abs(mp_theta(2, z, T)))
    assert abs(theta3(z, T) - mp_theta(3, z, T)) < 1e-12 * max(1, abs(mp_theta(3, z, T)))


@settings(max_examples=30, deadline=None)
@given(q=nomes, a=unit, b=unit)
def test_theta1_quasi_periodicity(q, a, b):
    T = Torus.from_q(q)
    z = _point(T, a, b)
    lhs = theta1(z + T.tau, T)
    rhs = -(1 / T.q) * cmath.exp(-2j * math.pi * z) * theta1(z, T)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(rhs))


def test_complex_nome():
    T = Torus(0.3 + 1.1j)
    z = 0.21 + 0.17j
    assert abs(theta1(z, T) + mp_theta(1, z, T)) < 1e-13


def test_from_q_roundtrip_and_limits():
    T = Torus.from_q(0.1)
    assert abs(T.q - 0.1) < 1e-15
    assert Torus.from_q(0).is_cusp
    with pytest.raises(ValueError):
        Torus.from_q(1.0)
    with pytest.raises(ValueError):
        Torus(-1j)


# ----------------------------------------------------------- log-derivatives


def test_log_derivative_vanishes_at_half_period():
    T = Torus.from_q(0.15)
    assert abs(theta1_log_derivatives(0.5, T, 1)) < 1e-14


def test_log_derivative_vs_finite_difference():
    T = Torus.from_q(0.2)
    z, h = 0.27 + 0.13j, 1e-5
    fd = (cmath.log(theta1(z + h, T)) - cmath.log(theta1(z - h, T))) / (2 * h)
    assert abs(theta1_log_derivatives(z, T, 1) - fd) < 1e-8


def test_second_log_derivative_small_q():
    q = 1e-5
    T = Torus.from_q(q)
    z = 0.3 + 0.05j
    lead = -(math.pi**2) / cmath.sin(math.pi * z) ** 2
    assert abs(theta1_log_derivatives(z, T, 2) - lead) < 100 * q * q


@settings(max_examples=20, deadline=None)
@given(q=nomes, a=unit, b=unit)
def test_log_derivatives_match_mpmath(q, a, b):
    T = Torus.from_q(q)
    z = _point(T, a - 0.5, b - 0.5)
    f0, f1, f2, f3 = (mp_theta(1, z, T, d) for d in range(4))
    l1 = f1 / f0
    l2 = f2 / f0 - l1**2
    l3 = f3 / f0 - 3 * f2 * f1 / f0**2 + 2 * l1**3
    for k, ref in ((1, l1), (2, l2), (3, l3)):
        got = theta1_log_derivatives(z, T, k)
        assert abs(got - ref) < 1e-10 * max(1, abs(ref))


def test_lattice_point_raises():
    T = Torus.from_q(0.1)
    with pytest.raises(LatticeSingularityError):
        theta1_log_derivatives(1 + T.tau, T, 1)


# ------------------------------------------------------------------------ eta


def test_eta_cusp_zero():
    assert eta(Torus.from_q(0)) == 0


def test_eta_product():
    q = 0.1
    prod = q ** (1 / 12) * np.prod([1 - q ** (2 * n) for n in range(1, 30)])
    assert abs(eta(Torus.from_q(q)) - prod) < 1e-14


def test_theta1_prime0_fd_and_eta_cube():
    T = Torus.from_q(0.25)
    h = 1e-5
    fd = (theta1(h, T) - theta1(-h, T)) / (2 * h)
    assert abs(fd - (-2 * math.pi * eta(T) ** 3)) < 1e-9
    assert abs(theta1_prime0(T) - (-2 * math.pi * eta(T) ** 3)) < 1e-13


def test_eta_real_positive_branch():
    T = Torus(0.9j)
    root = (theta1_prime0(T) / (-2 * math.pi)) ** (1 / 3)
    assert abs(eta(T) - root) < 1e-12 and eta(T).real > 0


def test_eta1_is_ratio_of_theta_derivatives():
    T = Torus.from_q(0.2)
    ref = -complex(mp.jtheta(1, 0, mp.mpf(0.2), 3)) / complex(mp.jtheta(1, 0, mp.mpf(0.2), 1)) * math.pi**2 / 6
    assert abs(eta1(T) - ref) < 1e-13


# ------------------------------------------------------------------------- wp


def test_wp_even():
    T = Torus.from_q(0.15)
    z = 0.2 + 0.1j
    assert abs(wp(z, T) - wp(-z, T)) < 1e-11 * abs(wp(z, T))


def test_wp_double_pole():
    T = Torus.from_q(0.1)
    assert abs(wp(0.01, T) * 0.01**2 - 1) < 1e-3


@settings(max_examples=30, deadline=None)
@given(q=nomes, a=unit, b=unit)
def test_wp_matches_theta_quotient_oracle(q, a, b):
    T = Torus.from_q(q)
    z = _point(T, a - 0.5, b - 0.5)
    ref = mp_wp(z, T)
    assert abs(wp(z, T) - ref) < 1e-11 * max(1, abs(ref))


@settings(max_examples=30, deadline=None)
@given(q=nomes, a=unit, b=unit)
def test_wp_doubly_periodic(q, a, b):
    T = Torus.from_q(q)
    z = _point(T, a, b)
    w = wp(z, T)
    assert abs(wp(z + 1, T) - w) < 1e-9 * abs(w)
    assert abs(wp(z + T.tau, T) - w) < 1e-9 * abs(w)


def test_wp_prime_finite_difference():
    T = Torus.from_q(0.2)
    z, h = 0.31 + 0.22j, 1e-5
    fd = (wp(z + h, T) - wp(z - h, T)) / (2 * h)
    assert abs(wp_prime(z, T) - fd) < 1e-7 * max(1, abs(fd))


def test_wp_vectorized():
    T = Torus.from_q(0.1)
    z = np.array([0.1 + 0.1j, 0.3 + 0.2j])
    assert np.allclose(wp(z, T), [wp(complex(v), T) for v in z], rtol=0, atol=1e-13)


# ---------------------------------------------------------------------- roots


@pytest.mark.parametrize("labeling", ["standard", "small-T"])
def test_roots_sum_to_zero(labeling):
    r = half_period_roots(Torus.from_q(0.2), labeling)
    scale = max(abs(r.e1), abs(r.e2), abs(r.e3))
    assert abs(r.e1 + r.e2 + r.e3) < 1e-10 * scale


def test_weierstrass_cubic():
    T = Torus.from_q(0.2)
    r = half_period_roots(T)
    z = 0.23 + 0.31 * T.tau
    p, dp = wp(z, T), wp_prime(z, T)
    assert abs(dp**2 - (4 * p**3 - r.g2 * p - r.g3)) < 1e-9 * abs(dp) ** 2


def test_second_derivative_identity():
    T = Torus.from_q(0.12)
    r = half_period_roots(T)
    z = 0.19 + 0.27 * T.tau
    p, dp = wp(z, T), wp_prime(z, T)
    # wp'' = 6 wp^2 - g2/2 from the cubic; compare with the product form.
    ddp = 6 * p * p - r.g2 / 2
    rhs = dp**2 / 2 * sum(1 / (p - e) for e in (r.e1, r.e2, r.e3))
    assert abs(ddp - rhs) < 1e-8 * abs(ddp)


def test_standard_labeling_values():
    T = Torus.from_q(0.1)
    r = half_period_roots(T)
    assert abs(r.e1 - wp(0.5, T)) < 1e-13 * abs(r.e1)
    assert abs(r.e3 - wp(T.tau / 2, T)) < 1e-12 * abs(r.e3)


def test_cusp_limits_and_small_T():
    r = half_period_roots(Torus.from_q(0))
    assert r.e1 == pytest.approx(2 * math.pi**2 / 3)
    s = half_period_roots(Torus.from_q(1e-4), "small-T")
    assert abs(s.cross_ratio) < 0.05
    with pytest.raises(ValueError):
        half_period_roots(Torus.from_q(0.1), "bogus")
