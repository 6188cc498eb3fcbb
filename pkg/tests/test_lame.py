import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamecf.elliptic import LatticeSingularityError, Torus, theta1
from lamecf.lame import (
    LameParams,
    accessory_at,
    accessory_report,
    base_integrals,
    gamma_tilde,
    log_derivatives,
    log_theta_ratio,
    phi_logq_coefficient,
    probe_points,
    weight,
)


def test_params_validation():
    with pytest.raises(ValueError):
        LameParams(2.0, 0.0)
    with pytest.raises(ValueError):
        LameParams(-4.0, 0.0)
    with pytest.raises(ValueError):
        LameParams(0.5, float("nan"))
    assert LameParams(2.0 - 1e-9, 0).kappa == pytest.approx(-0.25)


def test_phi_logq_coefficient_examples():
    assert phi_logq_coefficient(LameParams(0, 0)) == 0
    assert phi_logq_coefficient((2.0, 0.0)) == pytest.approx(-2 / 3)
    assert phi_logq_coefficient(LameParams(1.0, 1.0)) == pytest.approx(0.25)


def test_weight_positive_and_symmetric_at_zero_momentum():
    T = Torus.from_q(0.2)
    p = LameParams(1.0, 0.0)
    x = np.array([0.1, 0.3])
    w = weight(x, 1 - x, p, T)
    w2 = weight(1 - x, x, p, T)
    assert np.all(w.real > 0) and np.allclose(w, w2, rtol=1e-13, atol=0)


def test_log_theta_ratio_zero_at_start_and_continuous():
    T = Torus.from_q(0.3)
    z = 0.2 + 0.45 * T.tau
    x = np.linspace(0, 1, 2001)
    lr = log_theta_ratio(z, x, T)
    assert abs(lr[0]) < 1e-15
    assert np.max(np.abs(np.diff(lr))) < 0.05


@settings(max_examples=20, deadline=None)
@given(q=st.floats(0.02, 0.4), a=st.floats(-0.45, 0.45), b=st.floats(0.05, 0.95), x=st.floats(0, 1))
def test_log_theta_ratio_exponentiates_to_quotient(q, a, b, x):
    T = Torus.from_q(q)
    z = a + b * T.tau
    got = cmath.exp(complex(log_theta_ratio(z, x, T)))
    ref = theta1(z + x, T) / theta1(z, T)
    assert abs(got - ref) < 1e-10 * max(1, abs(ref))


def test_log_theta_ratio_rejects_lattice_path():
    T = Torus.from_q(0.1)
    with pytest.raises(LatticeSingularityError):
        log_theta_ratio(0.3 + 0j, 0.5, T)


def test_free_case_is_exponential():
    # alpha0 = 0: Gamma~ = exp(pi P0 z / 2), accessory = -(pi P0 / 2)^2.
    T = Torus.from_q(0.15)
    p = LameParams(0.0, 0.4)
    z = probe_points(T)
    assert np.allclose(gamma_tilde(z, p, T), np.exp(math.pi * 0.4 * z / 2), rtol=1e-13, atol=0)
    rep = accessory_report(p, T)
    assert abs(rep.accessory + (math.pi * 0.2) ** 2) < 1e-12
    assert rep.valid


def _mp_I0(p, q):
    """I0 by mpmath after x = s^k at each end, which removes the endpoint
    power singularity; theta1(1 - x) = theta1(x) avoids cancellation near 1."""
    a = mp.mpf(p.alpha0) / 2
    k = max(1, int(math.ceil(1 / (1 - a)))) if a > 0 else 1
    th = lambda x: mp.jtheta(1, mp.pi * x, q)
    S = mp.mpf(0.5) ** (mp.mpf(1) / k)
    left = lambda s: th(s**k) ** (-a) * mp.exp(mp.pi * p.P0 * s**k) * k * s ** (k - 1)
    right = lambda s: th(s**k) ** (-a) * mp.exp(mp.pi * p.P0 * (1 - s**k)) * k * s ** (k - 1)
    return complex(mp.quad(left, [0, S / 2, S]) + mp.quad(right, [0, S / 2, S]))


@pytest.mark.parametrize("a0,P0,q", [(1.0, 0.3, 0.1), (-1.5, -0.2, 0.25), (1.8, 0.0, 0.05)])
def test_I0_against_mpmath(a0, P0, q):
    p = LameParams(a0, P0)
    T = Torus.from_q(q)
    bi = base_integrals(p, T, [0.2 + 0.3 * T.tau])
    mp.mp.dps = 25
    try:
        ref = _mp_I0(p, mp.mpf(q))
    finally:
        mp.mp.dps = 15
    assert abs(bi.I0 - ref) < 1e-11 * abs(ref)


def test_Ilog_against_mpmath_oracle():
    p = LameParams(1.0, 0.25)
    T = Torus.from_q(0.2)
    z = 0.17 + 0.23 * T.tau
    bi = base_integrals(p, T, [z])
    # theta1(z + x) e^{i pi x} / theta1(z) returns to 1 at x = 1 and stays off
    # the negative axis here, so its principal log plus -i pi x is the
    # continuous branch.
    mp.mp.dps = 20
    try:
        qq = mp.mpf(0.2)
        th = lambda v: mp.jtheta(1, mp.pi * v, qq)
        lg = lambda x: -1j * mp.pi * x + mp.log(th(z + x) * mp.exp(1j * mp.pi * x) / th(z))
        args = [abs(mp.arg(th(z + x) * mp.exp(1j * mp.pi * x) / th(z))) for x in mp.linspace(0, 1, 101)]
        assert max(args) < 2.5
        w = lambda x: th(x) ** (-0.5) * mp.exp(mp.pi * 0.25 * x)
        # x = s^2 at both ends smooths the inverse square-root singularity.
        S = mp.sqrt(0.5)
        ref = mp.quad(lambda s: lg(s * s) * w(s * s) * 2 * s, [0, S])
        ref += mp.quad(lambda s: lg(1 - s * s) * th(s * s) ** (-0.5) * mp.exp(mp.pi * 0.25 * (1 - s * s)) * 2 * s, [0, S])
        ref = complex(ref)
    finally:
        mp.mp.dps = 15
    assert abs(bi.Ilog[0] - ref) < 1e-10 * abs(ref)


def test_log_derivatives_vs_finite_difference():
    p = LameParams(1.2, 0.3)
    T = Torus.from_q(0.1)
    z, h = 0.21 + 0.33 * T.tau, 1e-4
    L1, L2 = log_derivatives(z, p, T)
    g = [gamma_tilde(z + k * h, p, T) for k in (-1, 0, 1)]
    assert abs(L1 - (g[2] - g[0]) / (2 * h) / g[1]) < 1e-7
    assert abs(L2 - (g[2] - 2 * g[1] + g[0]) / h**2 / g[1]) < 1e-5


def test_accessory_vectorized_equals_scalar():
    p = LameParams(0.8, 0.1)
    T = Torus.from_q(0.12)
    z = probe_points(T)[:2]
    vec = accessory_at(z, p, T)
    assert abs(vec[1] - accessory_at(complex(z[1]), p, T)) < 1e-12 * abs(vec[1])


def test_accessory_report_needs_three_probes():
    T = Torus.from_q(0.1)
    with pytest.raises(ValueError):
        accessory_report(LameParams(1, 0), T, probes=[0.2 + 0.1j, 0.3 + 0.1j])


@pytest.mark.parametrize("a0", [1e-3, -1e-3])
def test_small_alpha0_nearly_constant_accessory(a0):
    # The z-dependence of the accessory enters at second order in alpha0.
    T = Torus.from_q(0.2)
    rep = accessory_report(LameParams(a0, 0.3), T)
    assert rep.spread < 50 * a0 * a0


def test_accessory_continuous_in_q():
    p = LameParams(1.0, 0.2)
    vals = [accessory_report(p, Torus.from_q(q)).accessory for q in (0.1, 0.1 + 1e-6)]
    assert abs(vals[0] - vals[1]) < 1e-3
