"""Loop integrals: vertex corrections I1, I2, the one-loop density term and
the Model II tadpoles.

Momentum integrals use ``int_k = int d^dk / (2 pi)^d``; for isotropic
integrands this is ``S_d / (2 pi)^d int_0^inf k^{d-1} dk``.

The second vertex diagram of the annihilation model is

    I2(t) = R^2 int_k Rhat(k)^2 int_{0<t1<t2<t} exp(-2 D k^2 (t2 - t1))
          = 2 R^2 / ((4 pi)^{d/2} Gamma(d/2)) int_0^inf k^{d-1} Rhat(k)^2 t^2 phi(2 D k^2 t) dk

with ``phi(x) = (x - 1 + e^-x) / x^2`` (``phi(0) = 1/2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import specialfns as sf
from .errors import (CriticalPointError, DivergenceError, ToleranceError, UVDivergenceError,
                     ValidationError)
from .kernels import Kernel, Profile
from .propagators import PropagatorParams, f_factor
from .quadrature import Envelope, kernel_envelope, radial_integral

METHODS = ("closed_form", "quadrature", "series")

# removable-singularity window around d = 2, 4: inside it the value is the
# analytic limit plus a first-order correction whose slope is a central
# difference over +-LIMIT_STEP (the general formulas lose ~eps/|d - d*| there)
LIMIT_WINDOW = 1e-5
LIMIT_STEP = 1e-3


@dataclass(frozen=True)
class LoopResult:
    value: float
    method: str
    est_error: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method}")
        if not self.est_error >= 0:
            raise ValidationError("est_error must be non-negative")

    def __float__(self):
        return float(self.value)


def _radial_measure(d: float) -> float:
    """S_d / (2 pi)^d."""
    return sf.sphere_surface(d) / (2.0 * math.pi) ** d


def _with_dim(kernel: Kernel, d: float | None) -> Kernel:
    if d is None or d == kernel.dim:
        return kernel
    return replace(kernel, dim=float(d))


# ---------------------------------------------------------------------------
# I1, I2


def i1(R: float, t: float) -> float:
    """Magnitude ``R t`` of the first vertex diagram (the diagram itself is ``-R t``)."""
    if t < 0:
        raise ValidationError("t must be >= 0")
    return R * t


def phi(x):
    """``(x - 1 + e^-x) / x^2``, series below x = 0.1."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 0.1
    if np.any(small):
        xs = x[small]
        acc = np.zeros_like(xs)
        for n in range(14, -1, -1):
            acc = acc * (-xs) + 1.0 / math.factorial(n + 2)
        out[small] = acc
    big = ~small
    if np.any(big):
        xb = x[big]
        out[big] = (xb + np.expm1(-xb)) / (xb * xb)
    return out


def i2_quadrature(kernel: Kernel, D: float, d: float | None = None, t: float = 1.0,
                  epsabs: float = 1e-300, epsrel: float = 1e-10) -> LoopResult:
    """Adaptive radial quadrature of I2 for any kernel.

    Raises ``UVDivergenceError`` when ``k^{d-3} Rhat(k)^2`` is not integrable
    at infinity (local kernel with d >= 2).
    """
    kernel = _with_dim(kernel, d)
    d = kernel.dim
    if not t > 0:
        raise ValidationError("i2_quadrature needs t > 0")
    R = kernel.rate
    if R == 0:
        return LoopResult(0.0, "quadrature", 0.0)
    C = 2.0 * R * R / ((4.0 * math.pi) ** (0.5 * d) * math.gamma(0.5 * d))
    env2 = kernel_envelope(kernel).power(2)
    if not env2.decays_faster_than(d - 3.0):
        raise UVDivergenceError(f"I2 is UV divergent for the {kernel.profile.value} kernel in d={d}")

    def f(k):
        rh = kernel.normalized_momentum(k)
        return C * k ** (d - 1.0) * rh * rh * t * t * phi(2.0 * D * k * k * t)

    def tail(K):
        return C * t / (2.0 * D) * env2.tail(K, d - 3.0)

    kt = 1.0 / math.sqrt(2.0 * D * t)
    scale = kt if kernel.is_local else min(kt, kernel.precision)
    val, err, _ = radial_integral(f, scale, tail, epsabs, epsrel)
    return LoopResult(val, "quadrature", max(err, 1e-16 * abs(val)))


def i2_local_closed(R: float, D: float, d: float, t: float) -> LoopResult:
    """``4 R^2 t^{2-d/2} / ((8 pi D)^{d/2} (2-d)(4-d))`` for d < 2."""
    if d >= 2:
        raise UVDivergenceError(f"local I2 is UV divergent in d={d} >= 2")
    val = 4.0 * R * R * t ** (2.0 - 0.5 * d) / ((8.0 * math.pi * D) ** (0.5 * d) * (2.0 - d) * (4.0 - d))
    return LoopResult(val, "closed_form", 0.0)


def _binom_series(d: float, z: float) -> float:
    """sum_n binom(-d/2, n) z^n / ((n+1)(n+2))."""
    total = 0.0
    c = 1.0
    n = 0
    while True:
        term = c / ((n + 1.0) * (n + 2.0))
        total += term
        if abs(term) < 1e-17 * abs(total) or n > 400:
            return total
        c *= (-0.5 * d - n) / (n + 1.0) * z
        n += 1


def i2_normal_closed(R: float, lam: float, D: float, d: float, t: float) -> LoopResult:
    """Closed form of I2 for the normal kernel.

    With ``A = lambda^-2``, ``z = 4 D t / A``, ``m = 2 - d/2`` and ``L = ln(1+z)``:

        I2 = R^2 (2 pi)^{-d/2} A^m / (8 D^2) * [expm1(m L)/(2m) - z/2] / (m - 1),

    whose d -> 2 limit is ``A ((1+z) L - z) / 2`` in the bracket.  For
    ``z < 0.1`` the convergent series
    ``(2 pi)^{-d/2} lambda^d sum_n binom(-d/2, n) (4 D lambda^2)^n t^{n+2} / ((n+1)(n+2))`` is used.
    """
    if t < 0 or not lam > 0:
        raise ValidationError("i2_normal_closed needs t >= 0 and lambda > 0")
    if t == 0 or R == 0:
        return LoopResult(0.0, "closed_form", 0.0)
    pref = R * R * (2.0 * math.pi) ** (-0.5 * d)
    z = 4.0 * D * lam * lam * t
    if z < 0.1:
        val = pref * lam**d * t * t * _binom_series(d, z)
        return LoopResult(val, "series", 1e-15 * abs(val))
    if abs(d - 2.0) < LIMIT_WINDOW:
        val = _limit_branch(lambda dd: _normal_general(R, lam, D, dd, t), 2.0, d,
                            _normal_general(R, lam, D, 2.0, t))
    else:
        val = _normal_general(R, lam, D, d, t)
    return LoopResult(val, "closed_form", 1e-13 * abs(val))


def _normal_general(R, lam, D, d, t):
    pref = R * R * (2.0 * math.pi) ** (-0.5 * d)
    z = 4.0 * D * lam * lam * t
    A = lam ** -2
    m = 2.0 - 0.5 * d
    L = math.log1p(z)
    if m == 1.0:
        bracket = 0.5 * ((1.0 + z) * L - z)
    else:
        E = 0.5 * L if m == 0.0 else math.expm1(m * L) / (2.0 * m)
        bracket = (E - 0.5 * z) / (m - 1.0)
    return pref * A**m / (8.0 * D * D) * bracket


def _limit_branch(f, d_star, d, f_star):
    """Value near a removable singularity: limit plus first-order correction."""
    if d == d_star:
        return f_star
    h = LIMIT_STEP
    slope = (f(d_star + h) - f(d_star - h)) / (2.0 * h)
    return f_star + (d - d_star) * slope


def _screened_B(d: float, z: float) -> float:
    """``e^z [Gamma(a+1, z) - z Gamma(a, z)] - Gamma(a+1) - (a-1) z Gamma(a)``, a = 3 - d/2."""
    a = 3.0 - 0.5 * d
    if z < 0.5:
        ga = sf.gamma(a)
        s1 = 0.0
        term = 1.0
        for j in range(1, 40):
            term *= z / j
            if j >= 2:
                s1 += (a - j) * term
        s2 = 0.0
        poch = a * (a + 1.0)
        zm = z
        for m in range(1, 40):
            s2 += m * zm / poch
            zm *= z
            poch *= a + m + 1.0
        return ga * s1 + z**a * s2
    return ((a - z) * sf.upper_incomplete_gamma_scaled(a, z) + z**a
            - sf.gamma(a + 1.0) - (a - 1.0) * z * sf.gamma(a))


def _screened_general(R, lam, D, d, t):
    z = 2.0 * D * t * lam * lam
    pref = R * R * lam ** (d - 4.0) / ((4.0 * math.pi) ** (0.5 * d) * D * D)
    return pref * _screened_B(d, z) / ((d - 2.0) * (d - 4.0))


def _screened_limit(R, lam, D, d_star, t):
    z = 2.0 * D * t * lam * lam
    C = sf.EULER_GAMMA
    if z < 1e-3:
        # symmetric Richardson extrapolation of the analytic-in-d series
        h = 1e-3
        avg = lambda hh: 0.5 * (_screened_general(R, lam, D, d_star + hh, t)
                                + _screened_general(R, lam, D, d_star - hh, t))
        return (4.0 * avg(0.5 * h) - avg(h)) / 3.0
    e1s = sf.upper_incomplete_gamma_scaled(0.0, z)  # e^z E1(z)
    if d_star == 4.0:
        inner = math.log(z) + 1.0 + (1.0 - z) * e1s - (1.0 - C)
        return R * R / (4.0 * math.pi) ** 2 * (-inner / (4.0 * D * D) + t * lam * lam / (2.0 * D))
    K = (z + 2.0) * math.log(z) + 3.0 + (2.0 - z) * e1s - 3.0 + 2.0 * C - z + z * C
    return R * R / (4.0 * math.pi) * (-t / (2.0 * D) + K / (4.0 * D * D * lam * lam))


def i2_screened_closed(R: float, lam: float, D: float, d: float, t: float) -> LoopResult:
    """Incomplete-gamma closed form of I2 for the screened-Poisson kernel.

    ``I2 = R^2 lambda^{d-4} / ((4 pi)^{d/2} D^2 (d-2)(d-4)) * B`` with
    ``z = 2 D t lambda^2``, ``a = 3 - d/2`` and
    ``B = e^z [Gamma(a+1, z) - z Gamma(a, z)] - Gamma(a+1) - (4-d) (z/2) Gamma(a)``.
    d = 2 and 4 are removable (limit branches); d >= 6 is UV divergent.
    """
    if t < 0 or not lam > 0:
        raise ValidationError("i2_screened_closed needs t >= 0 and lambda > 0")
    if d >= 6.0:
        raise DivergenceError(f"screened-Poisson I2 is UV divergent for d={d} >= 6")
    if t == 0 or R == 0:
        return LoopResult(0.0, "closed_form", 0.0)
    for d_star in (2.0, 4.0):
        if abs(d - d_star) < LIMIT_WINDOW:
            val = _limit_branch(lambda dd: _screened_general(R, lam, D, dd, t), d_star, d,
                                _screened_limit(R, lam, D, d_star, t))
            return LoopResult(val, "closed_form", 1e-12 * abs(val))
    z = 2.0 * D * t * lam * lam
    val = _screened_general(R, lam, D, d, t)
    gap = min(abs(d - 2.0), abs(d - 4.0))
    return LoopResult(val, "series" if z < 0.5 else "closed_form", abs(val) * (1e-14 + 1e-16 / gap))


def i2(kernel: Kernel, D: float, t: float, d: float | None = None) -> LoopResult:
    """I2 by the best available route (closed form where one exists)."""
    kernel = _with_dim(kernel, d)
    d = kernel.dim
    p = kernel.profile
    if p is Profile.LOCAL:
        return i2_local_closed(kernel.rate, D, d, t)
    if p is Profile.NORMAL:
        return i2_normal_closed(kernel.rate, kernel.precision, D, d, t)
    if p is Profile.SCREENED:
        return i2_screened_closed(kernel.rate, kernel.precision, D, d, t)
    return i2_quadrature(kernel, D, d, t)


def effective_coupling(kernel: Kernel, D: float, d: float | None = None, t: float = 1.0) -> float:
    """Dimensionless effective coupling ``I2 / I1`` with ``I1 = R t``."""
    kernel = _with_dim(kernel, d)
    if not t > 0:
        raise ValidationError("effective_coupling needs t > 0")
    return i2(kernel, D, t).value / i1(kernel.rate, t)


def crossover_time(kernel: Kernel, D: float) -> float:
    """Time below which I2 is well described by its small-t series.

    ``1/(4 D lambda^2)`` for the normal kernel (radius of convergence of
    its series); ``1/(2 D lambda^2)``, the diffusive time across ``1/lambda``,
    for the screened-Poisson and spherical kernels; ``inf`` for local.
    """
    p = kernel.profile
    if p is Profile.LOCAL:
        return math.inf
    lam = kernel.precision
    if p is Profile.NORMAL:
        return 1.0 / (4.0 * D * lam * lam)
    return 1.0 / (2.0 * D * lam * lam)


# ---------------------------------------------------------------------------
# one-loop density correction


def _gl_composite(breaks: np.ndarray, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = breaks[:-1], breaks[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def _x1_time_weights(t: float, n: int):
    t2_breaks = np.concatenate([[0.0], t * 4.0 ** -np.arange(24, -1, -1)])
    sig_breaks = np.concatenate([[0.0], 4.0 ** -np.arange(32, -1, -1)])
    t2, w2 = _gl_composite(t2_breaks, n)
    sg, ws = _gl_composite(sig_breaks, n)
    return t2, w2, sg, ws


def _x1_inner(k, rhat, t, a, n0, D, n):
    """Time double integral for each k (vectorised over k)."""
    t2, w2, sg, ws = _x1_time_weights(t, n)
    T2 = t2[:, None]
    S = T2 * sg[None, :]
    T1 = T2 - S
    W = (w2[:, None] * ws[None, :]) * T2  # dt1 = t2 dsigma
    L2 = np.log1p(a * T2)
    L1 = np.log1p(a * T1)
    Lt = math.log1p(a * t)
    base = 2.0 * (L2 - Lt) - 2.0 * L1  # G(0)^2-type and X_cl^2 pieces
    ratio = L1 - L2
    out = np.empty(k.size)
    for i in range(k.size):
        e = base + (2.0 + 2.0 * rhat[i]) * ratio - 2.0 * D * k[i] * k[i] * S
        out[i] = np.sum(W * np.exp(e))
    return n0 * n0 * out


def x1_loop(t: float, Rk: Kernel, n0: float, D: float, d: float | None = None,
            epsrel: float = 1e-8) -> LoopResult:
    """One-loop density diagram of the annihilation model.

        X1 = int_{0<t1<t2<t} int_k G(0; t2, t) R(k) G(k; t1, t2)^2 R(k) X_cl(t1)^2

    with ``G`` the response functional and ``X_cl`` the mean-field density.
    The time integrals use composite Gauss-Legendre rules on geometric
    panels; the error estimate adds the radial quadrature error to the
    difference between 10- and 14-point time rules.
    """
    Rk = _with_dim(Rk, d)
    d = Rk.dim
    if not t > 0:
        raise ValidationError("x1_loop needs t > 0")
    R = Rk.rate
    if R == 0 or n0 == 0:
        return LoopResult(0.0, "quadrature", 0.0)
    a = R * n0
    meas = _radial_measure(d)
    env2 = kernel_envelope(Rk).power(2)
    if not env2.decays_faster_than(d - 3.0):
        raise UVDivergenceError(f"X1 is UV divergent for the {Rk.profile.value} kernel in d={d}")

    def tail(K):
        return meas * R * R * n0 * n0 * t / (2.0 * D) * env2.tail(K, d - 3.0)

    kt = 1.0 / math.sqrt(2.0 * D * t)
    scale = kt if Rk.is_local else min(kt, Rk.precision)
    results = []
    for n in (10, 14):
        def f(k, n=n):
            rh = np.atleast_1d(Rk.normalized_momentum(k))
            return meas * R * R * k ** (d - 1.0) * rh * rh * _x1_inner(k, rh, t, a, n0, D, n)
        results.append(radial_integral(f, scale, tail, 1e-300, epsrel))
    val = results[1][0]
    err = results[1][1] + abs(results[1][0] - results[0][0])
    return LoopResult(val, "quadrature", max(err, 1e-16 * abs(val)))


# ---------------------------------------------------------------------------
# Model II tadpoles


def _f_lower_bound_k(p: PropagatorParams) -> float:
    """k above which F(k) >= k^2 / 2 regardless of the kernel shapes."""
    c0 = abs(p.M) + abs(p.Q) + 2.0 * abs(p.g * p.X)
    return math.sqrt(2.0 * c0)


def single_loop_tadpole(params: PropagatorParams, d: float, epsrel: float = 1e-10) -> LoopResult:
    """``-D g^2 X S_d/(2 pi)^d int_0^inf k^{d-1} Qhat(k) Rhat(k) / F(k) dk``."""
    p = params
    Qk, Rk = _with_dim(p.Qk, d), _with_dim(p.Rk, d)
    p = replace(p, Qk=Qk, Rk=Rk)
    if p.g == 0 or p.X == 0:
        return LoopResult(0.0, "quadrature", 0.0)
    if p.taubar <= 0:
        raise CriticalPointError(f"taubar = {p.taubar} <= 0")
    env = kernel_envelope(Qk) * kernel_envelope(Rk)
    env = Envelope(2.0 * env.c, env.alpha, env.beta, max(env.k_min, _f_lower_bound_k(p)))
    if not env.decays_faster_than(d - 3.0):
        raise UVDivergenceError(f"single-loop tadpole is UV divergent in d={d} for these kernels")

    def f(k):
        F = np.asarray(f_factor(k, p))
        if np.any(F <= 0):
            raise CriticalPointError("F(k) <= 0 inside the integration range")
        return k ** (d - 1.0) * Qk.normalized_momentum(k) * Rk.normalized_momentum(k) / F

    scales = [math.sqrt(p.taubar)] + [kk.precision for kk in (Qk, Rk) if not kk.is_local]
    val, err, _ = radial_integral(f, min(scales), lambda K: env.tail(K, d - 3.0), 1e-300, epsrel)
    pref = -p.D * p.g * p.g * p.X * _radial_measure(d)
    return LoopResult(pref * val, "quadrature", max(abs(pref) * err, 1e-16 * abs(pref * val)))


def _decay_power(kernel: Kernel) -> float:
    if kernel.profile is Profile.NORMAL:
        return math.inf
    return kernel_envelope(kernel).alpha


def _two_loop_uv_check(Qk: Kernel, Rk: Kernel, d: float, angular: str):
    aR, aQ = _decay_power(Rk), _decay_power(Qk)
    if angular == "local_q":
        aQ = 0.0
    # power counting: l large, k large, both large
    ok = (d < 4.0 + 2.0 * aR + aQ) and (d < 8.0 + aR + 2.0 * aQ) and (2.0 * d < 8.0 + 3.0 * aR + 2.0 * aQ)
    if not ok:
        raise UVDivergenceError(f"two-loop tadpole is UV divergent in d={d} for these kernels")


def _two_loop_grid(p: PropagatorParams, d: float, angular: str, n: int, k_lo: float, k_hi: float):
    Qk, Rk = p.Qk, p.Rk
    gx = p.g * p.X
    ub = np.linspace(math.log(k_lo), math.log(k_hi), int(math.ceil(math.log(k_hi / k_lo))) + 1)
    u, wu = _gl_composite(ub, n)
    kk = np.exp(u)
    wk = wu * kk**d  # k^{d-1} dk = k^d du

    if angular == "mean_angle":
        th_breaks = np.concatenate([[0.0], math.pi * 2.0 ** -np.arange(22, -1, -1)])
        th, wth = _gl_composite(th_breaks, n)
        wth = wth * np.sin(th) ** (d - 2.0)
        wth /= wth.sum()
        cth = np.cos(th)
    else:
        cth = None
        wth = None

    def F(q, qhat_q, rhat_q):
        return q * q + p.M - p.Q * qhat_q + gx * rhat_q + gx

    rk = Rk.normalized_momentum(kk)
    qk = np.ones_like(kk) if angular == "local_q" else Qk.normalized_momentum(kk)
    Fk = F(kk, qk, rk)
    if np.any(Fk <= 0):
        raise CriticalPointError("F(k) <= 0 on the integration grid")
    total = 0.0
    for i in range(kk.size):
        k = kk[i]
        l = kk
        if angular == "local_q":
            q = np.sqrt(k * k + l * l)
            qq = np.ones_like(q)
            rq = Rk.normalized_momentum(q)
            Fq = F(q, qq, rq)
            num = rk[i] * rk**2 * qk[i] * qq
            den = 2.0 * Fk[i] ** 2 * Fq * (Fk[i] + Fq + Fk)
            inner = num / den
        else:
            q = np.sqrt(np.maximum(k * k + l[:, None] ** 2 - 2.0 * k * l[:, None] * cth[None, :], 0.0))
            qq = Qk.normalized_momentum(q)
            rq = Rk.normalized_momentum(q)
            Fq = F(q, qq, rq)
            if np.any(Fq <= 0):
                raise CriticalPointError("F(|k-l|) <= 0 on the integration grid")
            num = qq / (Fq * (Fk[i] + Fq + Fk[:, None]))
            inner = rk[i] * rk**2 * qk[i] * (num @ wth) / (2.0 * Fk[i] ** 2)
        total += wk[i] * np.dot(wk, inner)
    return total


def two_loop_tadpole(params: PropagatorParams, d: float, angular: str = "mean_angle",
                     nodes: int = 8, k_range: tuple[float, float] | None = None) -> LoopResult:
    """Penultimate two-loop tadpole of the Model II steady state.

        -2 D g^5 X^2 S_d^2/(2 pi)^{2d} int int k^{d-1} l^{d-1}
            Rhat(k) Rhat(l)^2 Qhat(k) Qhat(k-l) / (2 F(k)^2 F(k-l) [F(k) + F(k-l) + F(l)])

    ``angular='mean_angle'`` averages the |k-l| dependence exactly over the
    relative angle (weight ``sin^{d-2}``); ``angular='local_q'`` takes local
    branching (Qhat = 1) and replaces ``|k-l|^2`` by its angular mean
    ``k^2 + l^2``.  Integration is a tensor Gauss-Legendre rule in
    ``log k``, ``log l`` (and the angle, graded towards the forward
    direction); the error estimate is the change from ``nodes - 2`` to
    ``nodes`` points per panel.
    """
    if angular not in ("mean_angle", "local_q"):
        raise ValidationError("angular must be 'mean_angle' or 'local_q'")
    Qk, Rk = _with_dim(params.Qk, d), _with_dim(params.Rk, d)
    p = replace(params, Qk=Qk, Rk=Rk)
    if p.g == 0 or p.X == 0:
        return LoopResult(0.0, "quadrature", 0.0)
    if p.taubar <= 0:
        raise CriticalPointError(f"taubar = {p.taubar} <= 0")
    if angular == "mean_angle" and d <= 1.0:
        raise ValidationError("mean_angle needs d > 1")
    _two_loop_uv_check(Qk, Rk, d, angular)
    if k_range is None:
        lams = [kk.precision for kk in (Qk, Rk) if not kk.is_local]
        lo_scale = min([math.sqrt(p.taubar)] + lams)
        hi_scale = max([math.sqrt(p.taubar), math.sqrt(abs(p.M) + abs(p.Q) + 2 * abs(p.g * p.X))] + lams)
        k_range = (1e-4 * lo_scale, 1e4 * hi_scale)
    pref = -2.0 * p.D * p.g**5 * p.X**2 * _radial_measure(d) ** 2
    fine = _two_loop_grid(p, d, angular, nodes, *k_range)
    coarse = _two_loop_grid(p, d, angular, nodes - 2, *k_range)
    val = pref * fine
    err = abs(pref * (fine - coarse))
    if not math.isfinite(val):
        raise ToleranceError("two-loop quadrature produced a non-finite value")
    return LoopResult(val, "quadrature", max(err, 1e-16 * abs(val)))
