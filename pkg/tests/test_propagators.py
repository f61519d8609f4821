import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nlrd.errors import CriticalPointError, ValidationError
from nlrd.kernels import Kernel
from nlrd.propagators import (PropagatorParams, bare_propagator, bare_propagator_freq, dressed_propagator,
                              f_factor, phi_phi, phi_phi_freq, phibar_phi, phibar_phi_freq,
                              response_functional)


def params(g=0.5, X=0.4, M=1.0, Q=0.3, D=1.2, profile="normal"):
    return PropagatorParams(D, M, Kernel(profile, Q, 1.5, 3), Kernel(profile, 1.0, 0.8, 3), g, X)


def test_bare_examples():
    for t in (0.0, 0.3, 10.0):
        assert bare_propagator(0.0, t, 1.0) == 1.0
    assert math.isclose(bare_propagator(1.0, 1.0, 1.0), math.exp(-1.0), rel_tol=1e-15)
    assert bare_propagator(1.0, -0.5, 1.0) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.1, 2.0), st.floats(0.0, 1.0))
def test_bare_semigroup(k, t1, t2, D, M):
    lhs = bare_propagator(k, t1 + t2, D, M)
    rhs = bare_propagator(k, t1, D, M) * bare_propagator(k, t2, D, M)
    assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-300)


def test_dressed_examples():
    D, M, Q, k, t = 1.3, 0.4, 0.25, 0.7, 2.0
    local = Kernel("local", D * Q, 1.0, 2)
    assert math.isclose(dressed_propagator(k, t, D, M, local), math.exp(-t * D * (k * k + M - Q)), rel_tol=1e-14)
    zero = Kernel("normal", 0.0, 1.0, 2)
    assert math.isclose(dressed_propagator(k, t, D, M, zero), bare_propagator(k, t, D, M), rel_tol=1e-15)
    assert math.isclose(dressed_propagator(0.0, t, D, 0.0, local), math.exp(t * D * Q), rel_tol=1e-14)


def _inverse_ft(fw, t):
    # (1/2pi) int e^{-i w t} f(w) dw for f with Re even and Im odd in w
    re = integrate.quad(lambda w: fw(w).real, 0.0, math.inf, weight="cos", wvar=t)[0]
    im = integrate.quad(lambda w: fw(w).imag, 0.0, math.inf, weight="sin", wvar=t)[0]
    return (re + im) / math.pi


@pytest.mark.parametrize("k,t", [(0.0, 0.5), (0.6, 1.0), (1.5, 0.3)])
def test_dressed_is_resummed_dyson_series(k, t):
    D, M = 1.0, 2.0
    Qk = Kernel("screened_poisson", 1.1, 1.0, 3)
    q = Qk.momentum_space(k)

    def partial_sum(w, n=80):
        g0 = bare_propagator_freq(k, w, D, M)
        return g0 * sum((q * g0) ** j for j in range(n))

    num = _inverse_ft(partial_sum, t)
    assert math.isclose(num, dressed_propagator(k, t, D, M, Qk), rel_tol=1e-6)


def test_response_examples():
    n0, D = 0.8, 1.0
    local = Kernel("local", 2.0, 1.0, 1)
    t1, t2 = 0.5, 3.0
    ratio = (1 + 2.0 * n0 * t1) / (1 + 2.0 * n0 * t2)
    assert math.isclose(response_functional(0.3, t1, t2, local, n0, D),
                        math.exp(-D * 0.09 * (t2 - t1)) * ratio**2, rel_tol=1e-14)
    normal = Kernel("normal", 2.0, 1.0, 1)
    assert math.isclose(response_functional(0.0, t1, t2, normal, n0, D), ratio**2, rel_tol=1e-14)
    assert response_functional(0.9, 1.7, 1.7, normal, n0, D) == 1.0
    with pytest.raises(ValidationError):
        response_functional(0.3, 2.0, 1.0, normal, n0, D)


def test_response_small_density_is_bare():
    K = Kernel("normal", 2.0, 1.0, 1)
    assert math.isclose(response_functional(0.7, 0.2, 1.4, K, 1e-12, 1.1),
                        bare_propagator(0.7, 1.2, 1.1), rel_tol=1e-10)


def test_f_factor_examples():
    p = params(profile="local")
    k = 0.9
    assert math.isclose(f_factor(k, p), k * k + p.M - p.Q + 2 * p.g * p.X, rel_tol=1e-14)
    p = params()
    k = 60.0
    assert math.isclose(f_factor(k, p), k * k + p.M + p.g * p.X, rel_tol=1e-14)
    p = params(g=0.0, Q=0.0)
    assert math.isclose(f_factor(k, p), k * k + p.M, rel_tol=1e-15)


def test_phi_phi_examples():
    p = params()
    k = 0.8
    assert math.isclose(phi_phi(k, 0.7, p), phi_phi(k, -0.7, p), rel_tol=1e-15)
    expected = p.g * p.X * p.Qk.normalized_momentum(k) / f_factor(k, p)
    assert math.isclose(phi_phi(k, 0.0, p), expected, rel_tol=1e-15)
    assert phi_phi(k, 0.3, params(g=0.0)) == 0.0
    assert phibar_phi(k, -1.0, p) == 0.0


def test_critical_point_error():
    # F(0) = M - Q + 2 g X = 0
    p = params(M=0.5, Q=1.0, g=0.5, X=0.5)
    with pytest.raises(CriticalPointError):
        phibar_phi(0.0, 1.0, p)


@pytest.mark.parametrize("k,w", [(0.0, 0.5), (0.7, 2.0), (1.4, 0.1)])
def test_frequency_forms_match_time_forms(k, w):
    p = params()
    # forward transform int e^{i w t} G(t) dt
    re = integrate.quad(lambda t: phibar_phi(k, t, p), 0.0, math.inf, weight="cos", wvar=w)[0]
    im = integrate.quad(lambda t: phibar_phi(k, t, p), 0.0, math.inf, weight="sin", wvar=w)[0]
    exact = phibar_phi_freq(k, w, p)
    assert math.isclose(re, exact.real, rel_tol=1e-6)
    assert math.isclose(im, exact.imag, rel_tol=1e-6)
    corr = 2.0 * integrate.quad(lambda t: phi_phi(k, t, p), 0.0, math.inf, weight="cos", wvar=w)[0]
    assert math.isclose(corr, phi_phi_freq(k, w, p), rel_tol=1e-6)
    g0 = integrate.quad(lambda t: bare_propagator(k, t, p.D, p.M), 0.0, math.inf, weight="cos", wvar=w)[0]
    assert math.isclose(g0, bare_propagator_freq(k, w, p.D, p.M).real, rel_tol=1e-6)
