import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from nlrd import rgflow as rg
from nlrd.errors import PoleError, ValidationError
from nlrd.kernels import Kernel
from nlrd.meanfield import ModelParams

EULER = 0.5772156649015329
LN43 = math.log(4.0 / 3.0)


def test_gstar_values():
    assert math.isclose(rg.gstar(2.0), 1.0, rel_tol=1e-15)
    assert math.isclose(rg.gstar(1.0), 2.0, rel_tol=1e-14)
    for eps in (1e-4, 1e-6):
        assert math.isclose(rg.gstar(eps) / (2.0 * math.pi * eps), 1.0, rel_tol=1e-3)


@pytest.mark.parametrize("eps", [0.0, -2.0, -4.0])
def test_gstar_poles(eps):
    with pytest.raises(PoleError):
        rg.gstar(eps)


def test_renormalize_examples():
    assert rg.renormalize_g(math.inf, 1.0) == rg.gstar(1.0)
    g = 3.7
    assert math.isclose(rg.bare_from_renormalized(rg.renormalize_g(g, 1.0), 1.0), g, rel_tol=1e-13)
    assert rg.flow_g_r(0.8, 1.0, 1.0) == 0.8


def test_flow_limits():
    assert math.isclose(rg.flow_g_r(0.3, 1e-12, 1.0), rg.gstar(1.0), rel_tol=1e-9)
    assert abs(rg.flow_g_r(0.3, 1e-12, -1.0)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 1.99), st.floats(1e-3, 10.0), st.floats(1e-3, 10.0), st.floats(0.1, 1.9))
def test_flow_g_r_composes(g_r, g1, g2, eps):
    gs = rg.gstar(eps)
    g_r = min(g_r, 0.99 * gs)
    two = rg.flow_g_r(rg.flow_g_r(g_r, g1, eps), g2, eps)
    assert math.isclose(two, rg.flow_g_r(g_r, g1 * g2, eps), rel_tol=1e-12)


@pytest.mark.parametrize("eps", [0.5, 1.0, -1.0])
def test_flow_fixed_points(eps):
    gs = rg.gstar(eps)
    for gm in (1e-3, 0.5, 7.0):
        assert rg.flow_g_r(gs, gm, eps) == gs
        assert rg.flow_g_r(0.0, gm, eps) == 0.0


def test_vertex_examples():
    d, k, s = 1.0, 0.4, 0.3
    x = s + 0.5 * k * k
    gs = rg.gstar(2.0 - d)
    assert math.isclose(rg.vertex_gamma12(k, s, 1e12, d), gs * x ** (1 - d / 2), rel_tol=1e-9)
    assert math.isclose(rg.vertex_gamma12(k, s, 1e-9, d), 1e-9, rel_tol=1e-8)
    # at s + k^2/2 = kappa^2, the vertex is R / (1 + g / g*) with g = R kappa^{d-2}
    kappa, R = 0.7, 2.3
    g = R * kappa ** (d - 2)
    val = rg.vertex_gamma12(0.0, kappa**2, R, d)
    assert math.isclose(val * kappa ** (d - 2), rg.renormalize_g(g, 2.0 - d), rel_tol=1e-13)


def test_asymptotic_density():
    amp = 0.5 - (5.0 + 2.0 * EULER) / (16.0 * math.pi)
    assert math.isclose(rg.asymptotic_density_model1(1.0, 1.0), amp, rel_tol=1e-13)
    assert math.isclose(rg.asymptotic_density_model1(1.0, 1.0), 0.37756147899, rel_tol=1e-10)
    assert math.isclose(rg.asymptotic_density_model1(400.0, 1.0), amp / 20.0, rel_tol=1e-13)
    assert math.isclose(rg.asymptotic_density_model1(5.0, 3.0, R=2.0), 0.1, rel_tol=1e-15)
    with pytest.raises(ValidationError):
        rg.asymptotic_density_model1(1.0, 2.0)


def _model(d, R=1.5, lam=0.8, n0=2.0):
    return ModelParams(1.0, Kernel("normal", R, lam, d), Kernel("local", 0.0, 1.0, d), 0.0, 0.0, n0, d)


def test_rescale_model1_examples():
    p = _model(1.0)
    assert rg.rescale_model1(p, 1.0) == p
    q = rg.rescale_model1(_model(2.0), 0.3)
    assert math.isclose(q.R, 1.5, rel_tol=1e-15)
    q = rg.rescale_model1(p, 0.5)
    assert math.isclose(q.R, 3.0, rel_tol=1e-15)
    assert math.isclose(q.Rk.precision, 1.6, rel_tol=1e-15)
    assert math.isclose(q.n0, 4.0, rel_tol=1e-15)
    f = rg.RescaleFactors.model1(0.5, 1.0)
    assert (f.eta, f.alpha, f.beta) == (0.25, 2.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0), st.sampled_from([1.0, 2.0, 3.0]))
def test_rescale_model1_composes(g1, g2, d):
    p = _model(d)
    a = rg.rescale_model1(rg.rescale_model1(p, g1), g2)
    b = rg.rescale_model1(p, g1 * g2)
    for x, y in ((a.R, b.R), (a.n0, b.n0), (a.Rk.precision, b.Rk.precision)):
        assert math.isclose(x, y, rel_tol=1e-12)


def _m2(d=3.5):
    return rg.ModelIIParams(1.0, 0.7, 0.4, 0.9, 0.9, 0.3, 0.2, 2.0, 1.5, d)


def test_rescale_model2_examples():
    p = _m2()
    q = rg.rescale_model2(p, 1.0)
    assert math.isclose(q.g, p.g, rel_tol=1e-15)
    assert math.isclose(q.b, p.b, rel_tol=1e-15)
    assert q.R4 == p.R4 and q.M == p.M
    p4 = _m2(4.0)
    assert math.isclose(rg.rescale_model2(p4, 0.2).g, p4.g, rel_tol=1e-14)
    gm, d = 0.3, 3.5
    q = rg.rescale_model2(p, gm)
    assert math.isclose(q.g, gm ** ((d - 4) / 2) * p.g, rel_tol=1e-13)
    assert math.isclose(q.b, gm ** (-2 - d / 2) * p.b, rel_tol=1e-13)
    f = rg.RescaleFactors.model2(gm, d, p.R3, p.Q3)
    assert math.isclose(f.alpha * f.beta * gm**d, 1.0, rel_tol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0), st.floats(1.0, 5.0))
def test_rescale_model2_composes(g1, g2, d):
    p = _m2(d)
    a = rg.rescale_model2(rg.rescale_model2(p, g1), g2)
    b = rg.rescale_model2(p, g1 * g2)
    for name in ("R4", "R3", "Q3", "Q2", "M", "lambda_r", "lambda_q"):
        assert math.isclose(getattr(a, name), getattr(b, name), rel_tol=1e-12)
    assert math.isclose(a.b, b.b, rel_tol=1e-12)


def test_z_factor_examples():
    assert rg.z_factors(0.0, 1.0) == (1.0, 1.0, 1.0, 1.0)
    assert math.isclose(rg.z_factors(0.1, 1.0)[2], 1.255, rel_tol=1e-14)
    expected = 1 + 0.05 + (3.5 - 3.0 + 4.5 * LN43) * 0.01 / 4.0
    assert math.isclose(rg.z_factors(0.1, 2.0)[0], expected, rel_tol=1e-14)
    with pytest.raises(PoleError):
        rg.z_factors(0.1, 0.0)


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
def test_z_factor_linear_coefficients(eps):
    h = 1e-7
    slopes = [(a - b) / (2 * h) for a, b in zip(rg.z_factors(h, eps), rg.z_factors(-h, eps))]
    for got, want in zip(slopes, (1 / eps, 1 / (2 * eps), 2 / eps, 4 / eps)):
        assert math.isclose(got, want, rel_tol=1e-6)


def test_beta_examples():
    eps = 1.3
    assert rg.beta_u(0.0, eps) == 0.0
    assert abs(rg.beta_u(eps / 6, eps)) < 1e-15
    assert math.isclose(rg.beta_u(eps / 3, eps), eps * eps / 3, rel_tol=1e-13)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.001, 0.999))
def test_beta_sign_structure(eps, frac):
    assert rg.beta_u(frac * eps / 6, eps) < 0
    assert rg.beta_u((1 + frac) * eps / 6, eps) > 0


def test_u_flow_examples():
    assert rg.u_flow(0.05, 1.0, 1.0) == 0.05
    assert math.isclose(rg.u_flow(0.05, 1e-12, 1.0), 1.0 / 6.0, rel_tol=1e-8)
    sol = solve_ivp(lambda s, u: [rg.beta_u(u[0], 1.0)], (0.0, math.log(0.1)), [0.02],
                    method="DOP853", rtol=1e-13, atol=1e-16)
    assert math.isclose(rg.u_flow(0.02, 0.1, 1.0), sol.y[0, -1], rel_tol=1e-8)


def test_u_flow_domain_error():
    # above the fixed point, flowing towards large gamma hits a pole of the solution
    with pytest.raises(rg.FlowDomainError):
        rg.u_flow(1.0, 10.0, 1.0)
    with pytest.raises(rg.FlowDomainError):
        rg.u_flow(1.0, 10.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.001, 0.3), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0), st.floats(0.2, 2.0))
def test_u_flow_composes_and_is_monotone(u, g1, g2, eps):
    assume(abs(u - eps / 6) > 1e-6)
    two = rg.u_flow(rg.u_flow(u, g1, eps), g2, eps)
    assert math.isclose(two, rg.u_flow(u, g1 * g2, eps), rel_tol=1e-10)
    lo, hi = sorted((u, eps / 6))
    assert lo - 1e-15 <= rg.u_flow(u, g1, eps) <= hi + 1e-15


def test_critical_exponents():
    e0 = rg.critical_exponents_model2(0.0)
    assert e0 == {"tau_exp": -2.0, "x_exp": -2.0, "b_exp": 4.0}
    e1 = rg.critical_exponents_model2(1.0)
    assert e1["tau_exp"] == -1.75
    assert math.isclose(e1["b_exp"], 3.5 - (1.75 - 8.5 * 0.2876820724517809) / 144.0, rel_tol=1e-14)


def test_mean_field_beta_exponent():
    assert rg.mean_field_beta_exponent(0.0) == 1.0
    assert math.isclose(rg.mean_field_beta_exponent(1.0), 5.0 / 6.0, rel_tol=1e-15)
    assert math.isclose(rg.mean_field_beta_exponent(3.0), 0.5, rel_tol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.1, 50.0), st.floats(0.05, 1.0), st.sampled_from([1.0, 1.5]))
def test_cs_model1_leaves_density_invariant(gamma, t, frac, d):
    kappa, n0 = 1.3, 0.8
    g_r = frac * rg.gstar(2.0 - d) * 0.99
    args = rg.CSArgsI(0.0, t, g_r, 1.0, n0, d)
    pref, new = rg.cs_rescaled_args_model1(args, gamma)
    lhs = rg.density_model1_from_gr(t, g_r, n0, kappa, d)
    rhs = pref * rg.density_model1_from_gr(new.t, new.g_r, new.n0, kappa, d)
    assert math.isclose(lhs, rhs, rel_tol=1e-9)


def test_cs_model1_identity_and_locality():
    args = rg.CSArgsI(0.3, 2.0, 0.5, 1.7, 0.9, 1.0)
    pref, new = rg.cs_rescaled_args_model1(args, 1.0)
    assert pref == 1.0 and new == args
    assert rg.cs_rescaled_args_model1(args, 1e-8)[1].lam > 1e7


def test_cs_model2_identity():
    args = rg.CSArgsII(0.4, 0.2, 0.05, 2.0, 1.0)
    mu = 1.7
    pref, new = rg.cs_rescaled_args_model2(args, 1.0, mu)
    assert math.isclose(pref, mu ** (2 + 1.5), rel_tol=1e-14)
    assert math.isclose(new.tau, 0.4 / mu**2, rel_tol=1e-14)
    assert math.isclose(new.X, 0.2 / mu**1.5, rel_tol=1e-14)
    assert new.u == 0.05 and math.isclose(new.lam, 2.0 / mu, rel_tol=1e-15)


def test_flow_tables():
    gammas = np.geomspace(1e-3, 1.0, 5)
    t1 = rg.flow_table_model1(0.5, 1.0, gammas)
    assert t1.shape == (5, 2) and t1[-1, 1] == 0.5
    t2 = rg.flow_table_model2(0.05, 1.0, 1.0, 1.0, 1.0, gammas)
    assert t2.shape == (5, 5)
    np.testing.assert_allclose(t2[-1, 1:], [0.05, 1.0, 1.0, 1.0], rtol=1e-14)
