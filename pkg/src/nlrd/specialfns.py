"""Special functions used by the kernel, loop and flow formulas.

Gamma and the Bessel functions delegate to ``math`` / ``scipy.special``;
the upper incomplete gamma function is implemented here because the
screened-Poisson loop integrals need it for non-positive ``a`` and in a
scaled form ``e^x Gamma(a, x)`` that does not underflow.

Evaluation regions of ``upper_incomplete_gamma``:

* ``x >= max(1.5, a + 1)``: Legendre continued fraction (modified Lentz).
* ``a > 0.5`` otherwise: ``Gamma(a) - gamma(a, x)`` with the positive-term
  lower series.
* ``a <= 0.5``, ``x < 1.5``: a cancellation-free series around integer
  ``a`` (see ``_upper_gamma_near_zero``) followed by downward recurrence.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

from .errors import DivergenceError, PoleError, ToleranceError, ValidationError

EULER_GAMMA = 0.57721566490153286061

_EPS = np.finfo(float).eps
_TINY = 1e-300
_CF_SWITCH = 1.5

# ln Gamma(1 + d) = -C d + sum_{k>=2} (-1)^k zeta(k) d^k / k, |d| < 1
_LNGAMMA1P_COEFFS = np.array(
    [(-1.0) ** k * float(_sp.zeta(k, 1)) / k for k in range(2, 80)]
)


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def gamma(x: float) -> float:
    """Euler gamma function; raises ``PoleError`` at 0, -1, -2, ..."""
    if _is_nonpositive_integer(x):
        raise PoleError(f"gamma has a pole at x={x}")
    try:
        return math.gamma(x)
    except OverflowError:
        return math.inf


def _gamma1p_minus_one(d: float) -> float:
    """Gamma(1 + d) - 1 without cancellation for |d| <= 0.5."""
    if d == 0.0:
        return 0.0
    powers = d ** np.arange(2, 2 + _LNGAMMA1P_COEFFS.size)
    lng = -EULER_GAMMA * d + float(np.dot(_LNGAMMA1P_COEFFS, powers))
    return math.expm1(lng)


def _lower_series(a: float, x: float) -> float:
    """gamma(a, x) for a > 0 via x^a e^-x sum x^n / (a)_{n+1}."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x))
    raise ToleranceError(f"lower incomplete gamma series did not converge (a={a}, x={x})")


def _upper_cf(a: float, x: float) -> float:
    """Continued fraction for Gamma(a, x) * e^x * x^-a (any real a, x > 0)."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0.0 else 1.0 / _TINY
    h = d
    for i in range(1, 20000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ToleranceError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def _upper_gamma_near_zero(d: float, x: float) -> float:
    """Gamma(d, x) for |d| <= 0.5 and small x.

    Uses Gamma(d, x) = [(Gamma(1+d) - 1) - (x^d - 1)]/d
    - x^d sum_{n>=1} (-x)^n / (n! (n + d)), with the d -> 0 limit
    -C - ln x - sum (-x)^n/(n n!) = E1(x).
    """
    lx = math.log(x)
    if d == 0.0:
        head = -EULER_GAMMA - lx
    else:
        head = (_gamma1p_minus_one(d) - math.expm1(d * lx)) / d
    total = 0.0
    term = 1.0
    for n in range(1, 500):
        term *= -x / n
        contrib = term / (n + d)
        total += contrib
        if abs(contrib) < _EPS * max(abs(total), _TINY):
            break
    return head - math.exp(d * lx) * total


def _upper_gamma_scaled(a: float, x: float) -> float:
    """e^x Gamma(a, x) for x > 0."""
    if x >= max(_CF_SWITCH, a + 1.0):
        return math.exp(a * math.log(x)) * _upper_cf(a, x)
    if a > 0.5:
        return math.exp(x) * (gamma(a) - _lower_series(a, x))
    # a <= 0.5 and x < 1.5: shift a into (-0.5, 0.5], then recur downwards
    m = max(0, math.ceil(-a - 0.5))
    d = a + m
    if d > 0.5:
        d -= 1.0
        m += 1
    g = _upper_gamma_near_zero(d, x)
    b = d
    for _ in range(m):
        b -= 1.0
        # Gamma(b, x) = (Gamma(b+1, x) - x^b e^-x) / b
        g = (g - math.exp(b * math.log(x) - x)) / b
    return math.exp(x) * g


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma ``Gamma(a, x) = int_x^inf s^(a-1) e^-s ds``.

    Defined for every real ``a`` when ``x > 0`` (analytic continuation in
    ``a``) and for ``a > 0`` when ``x == 0``.
    """
    if x < 0:
        raise ValidationError(f"upper_incomplete_gamma needs x >= 0, got {x}")
    if x == 0:
        if a <= 0:
            raise DivergenceError(f"Gamma({a}, 0) diverges for a <= 0")
        return gamma(a)
    if x > 700.0:
        return math.exp(-x + a * math.log(x)) * _upper_cf(a, x)
    return math.exp(-x) * _upper_gamma_scaled(a, x)


def upper_incomplete_gamma_scaled(a: float, x: float) -> float:
    """``e^x * Gamma(a, x)``; finite for large ``x`` where the plain value underflows."""
    if x < 0:
        raise ValidationError(f"upper_incomplete_gamma_scaled needs x >= 0, got {x}")
    if x == 0:
        return upper_incomplete_gamma(a, 0.0)
    return _upper_gamma_scaled(a, x)


def regularized_upper_gamma(a: float, x: float) -> float:
    """``Q(a, x) = Gamma(a, x) / Gamma(a)`` for ``a > 0``."""
    if a <= 0:
        raise ValidationError("regularized_upper_gamma needs a > 0")
    if x == 0:
        return 1.0
    if x >= max(_CF_SWITCH, a + 1.0):
        return math.exp(-x + a * math.log(x) - math.lgamma(a)) * _upper_cf(a, x)
    return 1.0 - _lower_series(a, x) / gamma(a)


def exp1(x: float) -> float:
    """Exponential integral ``E1(x) = Gamma(0, x)``."""
    return upper_incomplete_gamma(0.0, x)


def bessel_j(nu: float, x: float) -> float:
    """Bessel function of the first kind ``J_nu(x)`` for ``nu, x >= 0``."""
    if nu < 0 or x < 0:
        raise ValidationError(f"bessel_j needs nu >= 0 and x >= 0, got nu={nu}, x={x}")
    if x == 0:
        return 1.0 if nu == 0 else 0.0
    return float(_sp.jv(nu, x))


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind ``K_nu(x)``, ``x > 0``.

    ``K`` is even in its order, so negative ``nu`` is folded to ``|nu|``.
    """
    if x <= 0:
        raise ValidationError(f"bessel_k needs x > 0, got {x}")
    return float(_sp.kv(abs(nu), x))


def bessel_j_normalized(nu: float, x: float) -> float:
    """``Gamma(nu+1) (2/x)^nu J_nu(x)``, equal to 1 at ``x = 0``.

    Below ``x = 1`` the power series is summed directly (it is the removable
    0/0 of the ratio form); above, scipy's ``jv`` is used.
    """
    if x < 1.0:
        q = -0.25 * x * x
        term = 1.0
        total = 1.0
        m = 0
        while True:
            m += 1
            term *= q / (m * (nu + m))
            total += term
            if abs(term) < _EPS * abs(total):
                return total
    return math.exp(math.lgamma(nu + 1.0) + nu * math.log(2.0 / x)) * float(_sp.jv(nu, x))


def sphere_surface(d: float) -> float:
    """Surface area ``S_d = 2 pi^(d/2) / Gamma(d/2)`` of the unit sphere in R^d."""
    if d <= 0:
        raise ValidationError(f"dimension must be positive, got {d}")
    return 2.0 * math.pi ** (0.5 * d) / math.gamma(0.5 * d)


def ball_volume(d: float) -> float:
    """Volume ``V_d = pi^(d/2) / Gamma(d/2 + 1)`` of the unit ball in R^d."""
    if d <= 0:
        raise ValidationError(f"dimension must be positive, got {d}")
    return math.pi ** (0.5 * d) / math.gamma(0.5 * d + 1.0)


def digamma(x: float) -> float:
    if _is_nonpositive_integer(x):
        raise PoleError(f"digamma has a pole at x={x}")
    return float(_sp.digamma(x))
