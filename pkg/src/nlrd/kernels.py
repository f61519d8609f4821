"""Isotropic pair-interaction profiles in real and momentum space.

A ``Kernel`` carries an overall rate ``R`` (volume/time), a precision
``lambda`` (inverse length) and the spatial dimension ``d``.  Real-space
values are ``R * Rhat(r)`` with ``Rhat`` normalised to unit mass, and the
momentum form uses ``f(k) = int e^{-i p k} f(p) dp`` so that the momentum
value at ``k = 0`` is ``R``.

Profiles
--------
local            R delta(r)                                   <-> R
normal           R (lam^2/pi)^{d/2} exp(-lam^2 r^2)           <-> R exp(-k^2 / 4 lam^2)
screened_poisson R (2pi)^{-d/2} lam^2 (lam/r)^{d/2-1} K_{d/2-1}(lam r) <-> R lam^2/(lam^2 + k^2)
spherical        R lam^d / V_d  for r < 1/lam                 <-> R (2 lam/k)^{d/2} Gamma(d/2+1) J_{d/2}(k/lam)

The Riesz-potential family is recognised by name but not supported.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize
from scipy import special as sp

from . import specialfns as sf
from .errors import ValidationError


class Profile(str, enum.Enum):
    LOCAL = "local"
    NORMAL = "normal"
    SCREENED = "screened_poisson"
    SPHERICAL = "spherical"


UNSUPPORTED_PROFILES = {"riesz": "Riesz potentials need a user test function and are not implemented"}

# below this value of k/lambda the spherical momentum form is summed as a power series
SPHERICAL_SERIES_THRESHOLD = 1.0


class UnsupportedProfileError(ValidationError):
    kind = "unsupported_profile"


class DeltaProfileError(ValidationError):
    kind = "delta_profile"


def parse_profile(name) -> Profile:
    if isinstance(name, Profile):
        return name
    key = str(name).strip().lower().replace("-", "_")
    aliases = {"screened": "screened_poisson", "screenedpoisson": "screened_poisson",
               "gaussian": "normal", "delta": "local"}
    key = aliases.get(key, key)
    if key in UNSUPPORTED_PROFILES:
        raise UnsupportedProfileError(UNSUPPORTED_PROFILES[key])
    try:
        return Profile(key)
    except ValueError:
        raise ValidationError(f"unknown kernel profile {name!r}") from None


def _normalized_j(nu: float, x: np.ndarray) -> np.ndarray:
    """Gamma(nu+1) (2/x)^nu J_nu(x), vectorised, series below the threshold."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < SPHERICAL_SERIES_THRESHOLD
    if np.any(small):
        q = -0.25 * x[small] ** 2
        term = np.ones_like(q)
        total = np.ones_like(q)
        for m in range(1, 30):
            term = term * q / (m * (nu + m))
            total += term
        out[small] = total
    big = ~small
    if np.any(big):
        xb = x[big]
        out[big] = np.exp(math.lgamma(nu + 1.0) + nu * np.log(2.0 / xb)) * sp.jv(nu, xb)
    return out


@dataclass(frozen=True)
class Kernel:
    profile: Profile
    rate: float
    precision: float = 1.0
    dim: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "profile", parse_profile(self.profile))
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValidationError(f"kernel rate must be finite and >= 0, got {self.rate}")
        if not (self.dim >= 1 and math.isfinite(self.dim)):
            raise ValidationError(f"kernel dimension must be >= 1, got {self.dim}")
        if self.profile is not Profile.LOCAL and not (self.precision > 0 and math.isfinite(self.precision)):
            raise ValidationError(f"kernel precision must be positive, got {self.precision}")

    @property
    def lam(self) -> float:
        return self.precision

    @property
    def is_local(self) -> bool:
        return self.profile is Profile.LOCAL

    # ---- values -----------------------------------------------------------

    def normalized_momentum(self, k):
        """Rhat(k) with Rhat(0) = 1; accepts scalars or arrays."""
        k = np.abs(np.asarray(k, dtype=float))
        lam, d = self.precision, self.dim
        p = self.profile
        if p is Profile.LOCAL:
            out = np.ones_like(k)
        elif p is Profile.NORMAL:
            out = np.exp(-(k * k) / (4.0 * lam * lam))
        elif p is Profile.SCREENED:
            out = lam * lam / (lam * lam + k * k)
        else:
            out = _normalized_j(0.5 * d, np.atleast_1d(k / lam)).reshape(k.shape)
        return float(out) if out.ndim == 0 else out

    def momentum_space(self, k):
        return self.rate * self.normalized_momentum(k)

    def normalized_real(self, r):
        """Rhat(r) (unit mass); raises for the delta profile."""
        if self.profile is Profile.LOCAL:
            raise DeltaProfileError("the local profile is a delta function with no pointwise density")
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValidationError("real_space needs r >= 0")
        lam, d = self.precision, self.dim
        p = self.profile
        if p is Profile.NORMAL:
            out = (lam * lam / math.pi) ** (0.5 * d) * np.exp(-(lam * r) ** 2)
        elif p is Profile.SPHERICAL:
            out = np.where(r < 1.0 / lam, lam**d / sf.ball_volume(d), 0.0)
        else:
            nu = 0.5 * d - 1.0
            pref = (2.0 * math.pi) ** (-0.5 * d) * lam**d
            with np.errstate(divide="ignore", invalid="ignore"):
                x = lam * r
                out = pref * np.power(x, -nu) * sp.kv(abs(nu), x)
            zero = r == 0
            if np.any(zero):
                if d < 2:
                    a = abs(nu)
                    val = pref * 0.5 * math.gamma(a) * 2.0**a if a > 0 else math.inf
                else:
                    val = math.inf
                out = np.where(zero, val, out)
        out = np.asarray(out, dtype=float)
        return float(out) if out.ndim == 0 else out

    def real_space(self, r):
        return self.rate * self.normalized_real(r)

    def variance(self) -> float:
        """Per-component variance of the normalised profile."""
        lam, d = self.precision, self.dim
        p = self.profile
        if p is Profile.LOCAL:
            return 0.0
        if p is Profile.NORMAL:
            return 1.0 / (2.0 * lam * lam)
        if p is Profile.SCREENED:
            return 2.0 / (lam * lam)
        return 1.0 / (lam * lam * (d + 2.0))

    def rescaled(self, a: float) -> "Kernel":
        """Kernel with precision ``a * lambda`` (Rhat(k/a, lam) = Rhat(k, a lam))."""
        if not a > 0:
            raise ValidationError("rescale factor must be positive")
        if self.profile is Profile.LOCAL:
            return self
        return replace(self, precision=a * self.precision)

    def with_rate(self, rate: float) -> "Kernel":
        return replace(self, rate=rate)

    # ---- sampling and truncation -----------------------------------------

    def sample_displacement(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Displacement(s) drawn from Rhat; shape ``(d,)`` or ``(size, d)``."""
        d = int(self.dim)
        if d != self.dim:
            raise ValidationError("sampling needs an integer dimension")
        n = 1 if size is None else int(size)
        lam = self.precision
        p = self.profile
        if p is Profile.LOCAL:
            out = np.zeros((n, d))
        elif p is Profile.NORMAL:
            out = rng.normal(0.0, 1.0 / (lam * math.sqrt(2.0)), size=(n, d))
        elif p is Profile.SCREENED:
            # Rhat is a Gaussian scale mixture: alpha ~ Exp(1/lam^2), x | alpha ~ N(0, 2 alpha I)
            alpha = rng.exponential(1.0 / (lam * lam), size=n)
            out = rng.normal(size=(n, d)) * np.sqrt(2.0 * alpha)[:, None]
        else:
            g = rng.normal(size=(n, d))
            g /= np.linalg.norm(g, axis=1)[:, None]
            rad = rng.random(n) ** (1.0 / d) / lam
            out = g * rad[:, None]
        return out[0] if size is None else out

    def tail_mass(self, r: float) -> float:
        """Fraction of the kernel mass outside radius ``r``."""
        lam, d = self.precision, self.dim
        p = self.profile
        if p is Profile.LOCAL:
            return 0.0 if r > 0 else 1.0
        if r <= 0:
            return 1.0
        if p is Profile.NORMAL:
            return sf.regularized_upper_gamma(0.5 * d, (lam * r) ** 2)
        if p is Profile.SPHERICAL:
            return max(0.0, 1.0 - (lam * r) ** d)
        x = lam * r
        return sf.sphere_surface(d) * (2.0 * math.pi) ** (-0.5 * d) * x ** (0.5 * d) * sf.bessel_k(0.5 * d, x)

    def truncation_radius(self, mass_tol: float) -> float:
        """Smallest radius with at most ``mass_tol`` of the mass outside it."""
        if not 0 < mass_tol < 1:
            raise ValidationError("mass_tol must lie in (0, 1)")
        p = self.profile
        if p is Profile.LOCAL:
            return 0.0
        if p is Profile.SPHERICAL:
            return 1.0 / self.precision
        hi = 1.0 / self.precision
        while self.tail_mass(hi) > mass_tol:
            hi *= 2.0
        f = lambda lr: math.log(self.tail_mass(math.exp(lr))) - math.log(mass_tol)
        lo = hi / 2.0
        while self.tail_mass(lo) <= mass_tol and lo > 1e-12 / self.precision:
            lo /= 2.0
        return math.exp(optimize.brentq(f, math.log(lo), math.log(hi), xtol=1e-14, rtol=1e-14))

    # ---- serialisation ----------------------------------------------------

    def to_config(self) -> dict:
        return {"profile": self.profile.value, "rate": self.rate, "lambda": self.precision, "dim": self.dim}

    @classmethod
    def from_config(cls, cfg: dict, dim: float | None = None) -> "Kernel":
        if not isinstance(cfg, dict):
            raise ValidationError("kernel config must be a mapping")
        unknown = set(cfg) - {"profile", "rate", "lambda", "dim"}
        if unknown:
            raise ValidationError(f"unknown kernel fields: {sorted(unknown)}")
        if "profile" not in cfg or "rate" not in cfg:
            raise ValidationError("kernel config needs 'profile' and 'rate'")
        d = cfg.get("dim", dim)
        if d is None:
            raise ValidationError("kernel config needs 'dim'")
        try:
            return cls(parse_profile(cfg["profile"]), float(cfg["rate"]),
                       float(cfg.get("lambda", 1.0)), float(d))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad kernel config: {exc}") from None


# functional aliases

def real_space(kernel: Kernel, r):
    return kernel.real_space(r)


def momentum_space(kernel: Kernel, k):
    return kernel.momentum_space(k)


def variance(kernel: Kernel) -> float:
    return kernel.variance()


def rescaled(kernel: Kernel, a: float) -> Kernel:
    return kernel.rescaled(a)


def sample_displacement(kernel: Kernel, rng: np.random.Generator, size: int | None = None):
    return kernel.sample_displacement(rng, size)


def truncation_radius(kernel: Kernel, mass_tol: float) -> float:
    return kernel.truncation_radius(mass_tol)
