import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamecf.gammae import (
    LOG_SQRT_2PI,
    DivergenceError,
    GammaRatioChain,
    PoleError,
    _bracket,
    _log_gamma_integral,
    asymptote_check,
    claimed_limit,
    log_gamma,
    log_shift_ratio,
    semiclassical_B,
    shift_ratio,
)
from lamecf.lame import LameParams


def test_log_gamma_matches_mpmath():
    for z in (0.3, 2.5 + 1j, -1.5 + 0.2j, 7 - 3j):
        assert abs(log_gamma(z) - complex(mp.loggamma(z))) < 1e-13


def test_log_gamma_pole():
    with pytest.raises(PoleError):
        log_gamma(-2.0)
    with pytest.raises(PoleError) as err:
        log_gamma(np.array([1.0, 0.0]))
    assert err.value.index == 1


def test_chain_validation():
    with pytest.raises(ValueError):
        GammaRatioChain(1, 0.5, -1)
    with pytest.raises(ValueError):
        GammaRatioChain(1, 0.0, 1)
    assert log_shift_ratio(GammaRatioChain(0.3, 0.5, 0)) == 0


def test_single_shift_closed_form():
    # One step from z = 2 with chi = 1/2: sqrt(2 pi) (1/2)^{1 - 1/2} / Gamma(1) = sqrt(pi).
    assert abs(shift_ratio(GammaRatioChain(2.0, 0.5, 1)) - math.sqrt(math.pi)) < 1e-14


@settings(max_examples=30, deadline=None)
@given(
    x=st.floats(0.1, 3),
    y=st.floats(-2, 2),
    chi=st.floats(0.1, 2),
    j=st.integers(0, 6),
    k=st.integers(0, 6),
)
def test_chain_composition(x, y, chi, j, k):
    z = complex(x, y)
    whole = log_shift_ratio(GammaRatioChain(z, chi, j + k))
    parts = log_shift_ratio(GammaRatioChain(z, chi, j)) + log_shift_ratio(GammaRatioChain(z + j * chi, chi, k))
    assert abs(whole - parts) < 1e-11 * max(1, abs(whole))


def test_chain_hits_pole_at_origin():
    with pytest.raises(PoleError) as err:
        log_shift_ratio(GammaRatioChain(0j, 0.2, 3))
    assert err.value.index == 0


def test_log_gamma_integral_against_mpmath():
    s = 1.3 + 0.4j
    ref = complex(mp.quad(lambda x: mp.loggamma(s - x), [0.2, 1.1]))
    assert abs(_log_gamma_integral(s, 0.2, 1.1, None) - ref) < 1e-12


def test_log_gamma_integral_endpoint_singularity():
    # int_0^1 log Gamma(1 - x) dx = int_0^1 log Gamma(t) dt = log sqrt(2 pi) (Raabe).
    assert abs(_log_gamma_integral(1.0, 0.0, 1.0, None) - LOG_SQRT_2PI) < 1e-12


def test_B_vanishes_at_zero_insertion():
    assert semiclassical_B(LameParams(0.0, 0.7)) == 0


@settings(max_examples=10, deadline=None)
@given(a0=st.floats(-1.5, 1.5), P0=st.floats(-1, 1))
def test_B_momentum_reflection(a0, P0):
    # Only the leading term is odd in P0.
    d = semiclassical_B(LameParams(a0, -P0)) - semiclassical_B(LameParams(a0, P0))
    assert abs(d - math.pi * a0 * P0) < 1e-11


def test_B_constant_variants_differ_by_known_amount():
    p = LameParams(1.0, 0.5)
    d = semiclassical_B(p, constant="printed") - semiclassical_B(p, constant="lemma")
    assert abs(d - 4 * (math.sqrt(2 * math.pi) - LOG_SQRT_2PI)) < 1e-13
    with pytest.raises(ValueError):
        semiclassical_B(p, constant="other")


def test_B_regression_value():
    val = semiclassical_B(LameParams(1.0, 0.5))
    assert abs(val - (6.1414861750667269 + 4.7123889803846897j)) < 1e-11


def test_claimed_limit_diverges():
    with pytest.raises(DivergenceError) as err:
        claimed_limit(1.0 + 0.3j, max_doublings=6)
    vals = [abs(v) for _, v in err.value.history]
    assert vals[-1] > vals[-2] > vals[-3]
    with pytest.raises(ValueError):
        claimed_limit(-1.0)


def test_bracket_pole_at_real_xi():
    with pytest.raises(PoleError):
        _bracket(1.0 + 0j, 0.4)


def test_asymptote_check_input_validation():
    with pytest.raises(ValueError):
        asymptote_check(-1.0)
    with pytest.raises(ValueError):
        asymptote_check(1.0 + 0.5j, gammas=(0.1, 0.2))
