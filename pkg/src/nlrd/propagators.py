"""Two-point functions in momentum-time (and momentum-frequency) form.

Model II coefficients in ``PropagatorParams`` (M, Q via ``Qk.rate``, g, X
through ``g*X``) are D-scaled: the exponents are ``D*F(k)*t``.  The
``dressed_propagator`` takes a branching kernel with its physical rate.
Frequency forms use ``G(w) = int e^{i w t} G(t) dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CriticalPointError, ValidationError
from .kernels import Kernel


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def bare_propagator(k, t, D: float, M: float = 0.0):
    """``theta(t) exp(-t D (k^2 + M))``."""
    k = np.asarray(k, dtype=float)
    t = np.asarray(t, dtype=float)
    val = np.where(t >= 0, np.exp(-np.where(t >= 0, t, 0.0) * D * (k * k + M)), 0.0)
    return _out(val)


def bare_propagator_freq(k, w, D: float, M: float = 0.0):
    return 1.0 / (-1j * np.asarray(w) + D * (np.asarray(k) ** 2 + M))


def dressed_propagator(k, t, D: float, M: float, Qk: Kernel):
    """Bare propagator resummed over branching insertions.

    ``exp(-t (D (k^2 + M) - Q(k)))`` with ``Q(k) = Qk.momentum_space(k)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("dressed_propagator needs t >= 0")
    k = np.asarray(k, dtype=float)
    return _out(np.exp(-t * (D * (k * k + M) - Qk.momentum_space(k))))


def response_functional(k, t1: float, t2: float, Rk: Kernel, n0: float, D: float):
    """Propagator dressed by tree attachments to the initial density.

    ``exp(-D k^2 (t2 - t1)) ((1 + R n0 t1) / (1 + R n0 t2))^{1 + Rhat(k)}``.
    """
    if t1 < 0 or t1 > t2:
        raise ValidationError(f"response_functional needs 0 <= t1 <= t2, got t1={t1}, t2={t2}")
    k = np.asarray(k, dtype=float)
    R = Rk.rate
    ratio = (1.0 + R * n0 * t1) / (1.0 + R * n0 * t2)
    return _out(np.exp(-D * k * k * (t2 - t1)) * ratio ** (1.0 + Rk.normalized_momentum(k)))


@dataclass(frozen=True)
class PropagatorParams:
    D: float
    M: float
    Qk: Kernel
    Rk: Kernel
    g: float
    X: float

    def __post_init__(self):
        if not self.D > 0:
            raise ValidationError("D must be positive")

    @property
    def Q(self) -> float:
        return self.Qk.rate

    @property
    def taubar(self) -> float:
        """F(0) = M - Q + 2 g X."""
        return self.M - self.Q + 2.0 * self.g * self.X


def f_factor(k, p: PropagatorParams):
    """``F(k) = k^2 + M - Q Qhat(k) + g X Rhat(k) + g X``."""
    k = np.asarray(k, dtype=float)
    gx = p.g * p.X
    val = k * k + p.M - p.Q * p.Qk.normalized_momentum(k) + gx * p.Rk.normalized_momentum(k) + gx
    return _out(val)


def _checked_f(k, p: PropagatorParams):
    F = np.asarray(f_factor(k, p))
    if np.any(F == 0):
        raise CriticalPointError("F(k) = 0: propagator evaluated at the critical point")
    return F


def phibar_phi(k, t, p: PropagatorParams):
    """Response propagator ``theta(t) exp(-D F(k) t)``."""
    F = _checked_f(k, p)
    t = np.asarray(t, dtype=float)
    return _out(np.where(t >= 0, np.exp(-p.D * F * np.where(t >= 0, t, 0.0)), 0.0))


def phi_phi(k, t, p: PropagatorParams):
    """Correlator ``(g X Qhat(k) / F(k)) exp(-D F(k) |t|)``."""
    F = _checked_f(k, p)
    t = np.abs(np.asarray(t, dtype=float))
    return _out(p.g * p.X * p.Qk.normalized_momentum(k) / F * np.exp(-p.D * F * t))


def phibar_phi_freq(k, w, p: PropagatorParams):
    F = _checked_f(k, p)
    return 1.0 / (-1j * np.asarray(w) + p.D * F)


def phi_phi_freq(k, w, p: PropagatorParams):
    F = _checked_f(k, p)
    w = np.asarray(w, dtype=float)
    return _out(2.0 * p.D * p.g * p.X * p.Qk.normalized_momentum(k) / (w * w + (p.D * F) ** 2))
