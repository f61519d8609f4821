import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nlrd import loops
from nlrd import specialfns as sf
from nlrd.errors import DivergenceError, UVDivergenceError
from nlrd.kernels import Kernel
from nlrd.propagators import PropagatorParams

# (1/2pi) sqrt(pi/2) (4/3): direct time and momentum integration of the local d=1 diagram at R=D=t=1
I2_LOCAL_D1 = 0.2659615202676218
# scipy dblquad over (t1, t2) of the inner quad over k; normal kernel, d=1, R=lambda=n0=D=1, t=10
X1_NORMAL_D1_T10 = 0.029123570417014844


def test_i1_examples():
    assert loops.i1(1.0, 2.0) == 2.0
    assert loops.i1(3.0, 0.0) == 0.0
    assert loops.i1(0.0, 5.0) == 0.0


def test_i2_local_d1():
    q = loops.i2_quadrature(Kernel("local", 1.0, 1.0, 1), 1.0, 1.0, 1.0)
    c = loops.i2_local_closed(1.0, 1.0, 1.0, 1.0)
    assert math.isclose(c.value, I2_LOCAL_D1, rel_tol=1e-13)
    assert math.isclose(q.value, I2_LOCAL_D1, rel_tol=1e-8)
    assert q.method == "quadrature" and q.est_error > 0


def test_i2_local_d1_general_params():
    R, D, t = 1.7, 0.6, 3.1
    direct = R * R / (2 * math.pi) * math.sqrt(math.pi / (2 * D)) * (4.0 / 3.0) * t**1.5
    assert math.isclose(loops.i2_local_closed(R, D, 1.0, t).value, direct, rel_tol=1e-13)


def test_i2_local_d3_diverges():
    with pytest.raises(UVDivergenceError):
        loops.i2_quadrature(Kernel("local", 1.0, 1.0, 3), 1.0, 3.0, 1.0)


@pytest.mark.parametrize("d", [1.0, 2.5, 3.0, 4.0])
@pytest.mark.parametrize("lam", [0.5, 2.0])
@pytest.mark.parametrize("Dt", [0.1, 1.0, 10.0])
def test_closed_forms_match_quadrature(d, lam, Dt):
    D = 1.3
    t = Dt / D
    for profile, closed in (("normal", loops.i2_normal_closed), ("screened_poisson", loops.i2_screened_closed)):
        K = Kernel(profile, 1.4, lam, d)
        q = loops.i2_quadrature(K, D, d, t).value
        c = closed(1.4, lam, D, d, t).value
        assert math.isclose(c, q, rel_tol=1e-7), (profile, c, q)


def test_normal_small_t_leading_term():
    R, lam, D, d, t = 1.3, 1.1, 1.0, 3.0, 1e-5
    lead = R * R * lam**d * t * t / (2.0 * (2.0 * math.pi) ** (d / 2))
    assert math.isclose(loops.i2_normal_closed(R, lam, D, d, t).value, lead, rel_tol=1e-4)


def test_large_precision_recovers_local():
    local = loops.i2_local_closed(1.0, 1.0, 1.0, 2.0).value
    assert math.isclose(loops.i2_normal_closed(1.0, 1e4, 1.0, 1.0, 2.0).value, local, rel_tol=1e-3)
    assert math.isclose(loops.i2_screened_closed(1.0, 1e4, 1.0, 1.0, 2.0).value, local, rel_tol=1e-3)


@pytest.mark.parametrize("closed", [loops.i2_normal_closed, loops.i2_screened_closed])
@pytest.mark.parametrize("dstar", [2.0, 4.0])
def test_removable_singularities(closed, dstar):
    at = closed(1.0, 0.9, 1.0, dstar, 1.3).value
    for s in (-1e-7, 1e-7):
        assert math.isclose(closed(1.0, 0.9, 1.0, dstar + s, 1.3).value, at, rel_tol=1e-4)
    q = loops.i2_quadrature(Kernel("normal" if closed is loops.i2_normal_closed else "screened", 1.0, 0.9, dstar),
                            1.0, dstar, 1.3).value
    assert math.isclose(at, q, rel_tol=1e-6)


def test_screened_true_divergence():
    with pytest.raises(DivergenceError):
        loops.i2_screened_closed(1.0, 1.0, 1.0, 6.0, 1.0)


def test_uv_regulation_ordering():
    with pytest.raises(UVDivergenceError):
        loops.i2(Kernel("local", 1.0, 1.0, 3), 1.0, 1.0)
    assert math.isfinite(loops.i2(Kernel("normal", 1.0, 1.0, 3), 1.0, 1.0).value)
    assert math.isfinite(loops.i2(Kernel("screened_poisson", 1.0, 1.0, 3), 1.0, 1.0).value)
    assert math.isfinite(loops.i2(Kernel("normal", 1.0, 1.0, 6), 1.0, 1.0).value)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["normal", "screened_poisson"]), st.floats(1.0, 3.5), st.floats(0.05, 5.0),
       st.floats(1.01, 3.0))
def test_i2_monotone(profile, d, t, factor):
    K = Kernel(profile, 1.0, 1.0, d)
    assert loops.i2(K, 1.0, t * factor).value > loops.i2(K, 1.0, t).value
    K2 = K.with_rate(factor)
    assert loops.i2(K2, 1.0, t).value > loops.i2(K, 1.0, t).value


def test_effective_coupling_local_slope():
    K = Kernel("local", 1.0, 1.0, 1)
    t = np.geomspace(10, 1000, 9)
    y = [loops.effective_coupling(K, 1.0, 1.0, tt) for tt in t]
    assert math.isclose(np.polyfit(np.log(t), np.log(y), 1)[0], 0.5, abs_tol=0.01)


@pytest.mark.parametrize("profile", ["local", "normal", "screened_poisson", "spherical"])
def test_ir_growth_below_two_dimensions(profile):
    K = Kernel(profile, 1.0, 1.0, 1)
    assert loops.effective_coupling(K, 1.0, 1.0, 1e4) > loops.effective_coupling(K, 1.0, 1.0, 1e2)


def test_crossover_time():
    assert loops.crossover_time(Kernel("normal", 1.0, 1.0, 1), 1.0) == 0.25
    assert loops.crossover_time(Kernel("normal", 1.0, 1e8, 1), 1.0) < 1e-16
    assert loops.crossover_time(Kernel("local", 1.0, 1.0, 1), 1.0) == math.inf
    assert loops.crossover_time(Kernel("spherical", 1.0, 2.0, 1), 1.0) == 0.125


def test_x1_zero_rate():
    assert loops.x1_loop(3.0, Kernel("normal", 0.0, 1.0, 1), 1.0, 1.0).value == 0.0


def test_x1_oracle_value():
    r = loops.x1_loop(10.0, Kernel("normal", 1.0, 1.0, 1), 1.0, 1.0)
    assert math.isclose(r.value, X1_NORMAL_D1_T10, rel_tol=1e-9)


@pytest.mark.parametrize("gamma", [0.3, 0.7])
def test_x1_collapse_non_dyadic(gamma):
    K = Kernel("normal", 1.0 / gamma, 1.0 / gamma, 1)
    r = loops.x1_loop(10.0 * gamma**2, K, 1.0 / gamma, 1.0)
    assert math.isclose(gamma * r.value, X1_NORMAL_D1_T10, rel_tol=1e-9)


def test_single_loop_local_d1_closed_form():
    # int dk/2pi 1/(k^2 + taubar) = 1/(2 sqrt(taubar))
    p = PropagatorParams(1.5, 0.9, Kernel("local", 0.2, 1.0, 1), Kernel("local", 1.0, 1.0, 1), 0.7, 0.3)
    exact = -p.D * p.g**2 * p.X / (2.0 * math.sqrt(p.taubar))
    assert math.isclose(loops.single_loop_tadpole(p, 1.0).value, exact, rel_tol=1e-9)


def test_single_loop_normal_d4_finite_and_zero_coupling():
    p = PropagatorParams(1.0, 0.5, Kernel("normal", 0.2, 1.0, 4), Kernel("normal", 1.0, 1.0, 4), 0.7, 0.3)
    v = loops.single_loop_tadpole(p, 4.0).value
    assert math.isfinite(v) and v < 0
    # radial oracle with scipy
    f = lambda k: k**3 * math.exp(-k * k / 2) / (k * k + 0.5 - 0.2 * math.exp(-k * k / 4)
                                                   + 0.21 * math.exp(-k * k / 4) + 0.21)
    ref = -0.7**2 * 0.3 * sf.sphere_surface(4) / (2 * math.pi) ** 4 * integrate.quad(f, 0, math.inf)[0]
    assert math.isclose(v, ref, rel_tol=1e-8)
    p0 = PropagatorParams(1.0, 0.5, p.Qk, p.Rk, 0.0, 0.3)
    assert loops.single_loop_tadpole(p0, 4.0).value == 0.0


def test_single_loop_local_uv_divergence():
    p = PropagatorParams(1.0, 0.5, Kernel("local", 0.2, 1.0, 3), Kernel("local", 1.0, 1.0, 3), 0.7, 0.3)
    with pytest.raises(UVDivergenceError):
        loops.single_loop_tadpole(p, 3.0)


@pytest.mark.parametrize("angular", ["local_q", "mean_angle"])
def test_two_loop_trivial_zeros(angular):
    K = Kernel("screened_poisson", 0.1, 10.0, 3.5)
    R = Kernel("screened_poisson", 1.0, 10.0, 3.5)
    assert loops.two_loop_tadpole(PropagatorParams(1.0, 0.5, K, R, 0.0, 0.3), 3.5, angular).value == 0.0
    assert loops.two_loop_tadpole(PropagatorParams(1.0, 0.5, K, R, 0.5, 0.0), 3.5, angular).value == 0.0
