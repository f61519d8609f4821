"""Vectorised adaptive Gauss-Kronrod quadrature and radial integrals on [0, inf).

``gk_adaptive`` bisects 7/15-point Gauss-Kronrod panels until the summed
``|K15 - G7|`` estimate meets the tolerance.  ``radial_integral`` extends
the upper limit by doubling until an analytic tail bound supplied by the
caller drops below a tenth of the tolerance; a tail bound of ``inf``
signals a UV divergence.

Tail bounds are built from kernel decay envelopes ``c k^-alpha exp(-beta k^2)``
valid for ``k >= k_min`` (see ``Envelope``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import specialfns as sf
from .errors import ToleranceError, UVDivergenceError
from .kernels import Kernel, Profile

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

# full 15-point node set on [-1, 1] and matching weights
_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_WK = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[13, 11, 9]] = _WG[:3]


def _gk_panels(f, a: np.ndarray, b: np.ndarray):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    k = half * (y @ _WK)
    g = half * (y @ _WG15)
    return k, np.abs(k - g)


def gk_adaptive(f, breakpoints, epsabs: float = 1e-12, epsrel: float = 1e-8,
                max_panels: int = 200000):
    """Integrate a vectorised ``f`` over ``[breakpoints[0], breakpoints[-1]]``.

    Returns ``(value, error_estimate)``.
    """
    bp = np.asarray(breakpoints, dtype=float)
    a, b = bp[:-1], bp[1:]
    done_val = 0.0
    done_err = 0.0
    val, err = _gk_panels(f, a, b)
    while True:
        total = done_val + val.sum()
        total_err = done_err + err.sum()
        tol = max(epsabs, epsrel * abs(total))
        if total_err <= tol:
            return total, total_err
        if 2 * a.size > max_panels:
            raise ToleranceError(f"quadrature did not converge: error {total_err:.3g} > tol {tol:.3g}")
        # bisect panels whose error exceeds an equal share of the budget
        share = tol / max(a.size, 1) * 0.5
        bad = err > share
        if not np.any(bad):
            bad = err >= np.max(err)
        done_val += val[~bad].sum()
        done_err += err[~bad].sum()
        a_bad, b_bad = a[bad], b[bad]
        m = 0.5 * (a_bad + b_bad)
        if np.any(m <= a_bad) or np.any(m >= b_bad):
            raise ToleranceError("quadrature panels underflowed; integrand may be singular")
        a = np.concatenate([a_bad, m])
        b = np.concatenate([m, b_bad])
        val, err = _gk_panels(f, a, b)


def geometric_breakpoints(lo: float, hi: float, per_factor2: int = 1) -> np.ndarray:
    """``[0, lo, ..., hi]`` with geometric spacing (factor 2^(1/per_factor2))."""
    n = max(1, int(math.ceil(per_factor2 * math.log2(hi / lo))))
    return np.concatenate([[0.0], np.geomspace(lo, hi, n + 1)])


# ---------------------------------------------------------------------------
# decay envelopes


@dataclass(frozen=True)
class Envelope:
    """Bound ``|f(k)| <= c k^-alpha exp(-beta k^2)`` valid for ``k >= k_min``."""

    c: float = 1.0
    alpha: float = 0.0
    beta: float = 0.0
    k_min: float = 0.0

    def __mul__(self, other: "Envelope") -> "Envelope":
        return Envelope(self.c * other.c, self.alpha + other.alpha, self.beta + other.beta,
                        max(self.k_min, other.k_min))

    def power(self, n: int) -> "Envelope":
        out = Envelope()
        for _ in range(n):
            out = out * self
        return out

    def tail(self, K: float, p: float) -> float:
        """Bound on ``int_K^inf k^p |f(k)| dk``; ``inf`` if it diverges, ``nan`` if K < k_min."""
        if K < self.k_min:
            return math.nan
        q = p - self.alpha
        if self.beta > 0:
            s = 0.5 * (q + 1.0)
            return 0.5 * self.c * self.beta ** (-s) * sf.upper_incomplete_gamma(s, self.beta * K * K)
        if q >= -1.0:
            return math.inf
        return self.c * K ** (q + 1.0) / (-(q + 1.0))

    def decays_faster_than(self, p: float) -> bool:
        """True when ``k^p |f(k)|`` is integrable at infinity."""
        return self.beta > 0 or p - self.alpha < -1.0


# |J_nu(x)| <= 1.2 sqrt(2/(pi x)) for x >= max(10, 4 nu^2), nu in [0, 6]
_J_ENV = 1.2 * math.sqrt(2.0 / math.pi)


def kernel_envelope(kernel: Kernel) -> Envelope:
    """Envelope of the normalised momentum profile ``|Rhat(k)|``."""
    p = kernel.profile
    lam, d = kernel.precision, kernel.dim
    if p is Profile.LOCAL:
        return Envelope()
    if p is Profile.NORMAL:
        return Envelope(1.0, 0.0, 1.0 / (4.0 * lam * lam))
    if p is Profile.SCREENED:
        return Envelope(lam * lam, 2.0, 0.0)
    nu = 0.5 * d
    c = math.exp(math.lgamma(nu + 1.0)) * 2.0**nu * _J_ENV * lam ** (nu + 0.5)
    return Envelope(c, nu + 0.5, 0.0, max(10.0, 4.0 * nu * nu) * lam)


def radial_integral(f, scale: float, tail_bound, epsabs: float = 1e-12, epsrel: float = 1e-8,
                    k_floor: float = 1e-9, max_k_factor: float = 1e15, per_factor2: int = 1):
    """Integrate ``f`` over ``[0, inf)`` with a caller-supplied tail bound.

    ``tail_bound(K)`` bounds ``int_K^inf |f|``; ``inf`` raises
    ``UVDivergenceError``, ``nan`` means the bound is not yet valid.
    Returns ``(value, error_estimate, k_max)``.
    """
    K = 8.0 * scale
    t0 = tail_bound(K)
    if t0 == math.inf:
        raise UVDivergenceError("integrand tail does not decay fast enough: UV divergent")
    bp = geometric_breakpoints(k_floor * scale, K, per_factor2)
    val, err = gk_adaptive(f, bp, 0.1 * epsabs, 0.1 * epsrel)
    while True:
        tb = tail_bound(K)
        if tb == math.inf:
            raise UVDivergenceError("integrand tail does not decay fast enough: UV divergent")
        tol = max(epsabs, epsrel * abs(val))
        if not math.isnan(tb) and tb < 0.1 * tol:
            return float(val), float(err + tb), K
        if K > max_k_factor * scale:
            raise ToleranceError(f"tail bound {tb:.3g} still above tolerance {tol:.3g} at k={K:.3g}")
        v2, e2 = gk_adaptive(f, np.geomspace(K, 4.0 * K, 2 * per_factor2 + 1), 0.05 * tol, 0.0)
        val += v2
        err += e2
        K *= 4.0
