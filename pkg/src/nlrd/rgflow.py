"""Action-preserving rescalings, renormalised couplings and their flows.

Model I (pure annihilation, critical dimension 2, ``eps = 2 - d``):
lengths scale by ``gamma``, times by ``gamma^2`` (diffusion held fixed),
so ``R -> gamma^{d-2} R``, ``lambda -> lambda / gamma`` and
``n0 -> gamma^{-d} n0``.  The renormalised coupling obeys

    g*/g_r(gamma) - 1 = gamma^eps (g*/g_r - 1),    g* = (4 pi)^{1-eps/2} / Gamma(eps/2).

Model II (annihilation with branching, birth and death, critical dimension
4, ``eps = 4 - d``) uses ``u = G_eps g^2 mu^{-eps}`` with the one-loop flow
``du/dlog(gamma) = -eps u + 6 u^2`` and the two-loop Z-factors.
All flows are functions of the scale factor ``gamma``, never of time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import specialfns as sf
from .errors import NumericalError, PoleError, ValidationError
from .kernels import Kernel, Profile
from .meanfield import ModelParams, density_model1

LN43 = math.log(4.0 / 3.0)
EULER_GAMMA = sf.EULER_GAMMA


class FlowDomainError(NumericalError):
    kind = "flow_domain"


def _check_gamma(gamma: float):
    if not gamma > 0:
        raise ValidationError(f"scale factor gamma must be positive, got {gamma}")


@dataclass(frozen=True)
class RescaleFactors:
    """Space, time and field scale factors ``x -> gamma x``, ``t -> eta t``."""

    gamma: float
    eta: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.eta > 0):
            raise ValidationError("gamma and eta must be positive")

    @classmethod
    def model1(cls, gamma: float, d: float) -> "RescaleFactors":
        """Diffusion held fixed; the response field is not rescaled."""
        return cls(gamma, gamma * gamma, gamma ** (-d), 1.0)

    @classmethod
    def model2(cls, gamma: float, d: float, R3: float, Q3: float) -> "RescaleFactors":
        """Symmetric choice equalising both cubic couplings, ``alpha beta gamma^d = 1``."""
        beta = gamma ** (-0.5 * d) * math.sqrt(Q3 / R3)
        return cls(gamma, gamma * gamma, gamma ** (-d) / beta, beta)


# ---------------------------------------------------------------------------
# Model I


def rescale_model1(params: ModelParams, gamma: float) -> ModelParams:
    """``D' = D``, ``R' = gamma^{d-2} R``, ``lambda' = lambda/gamma``, ``n0' = gamma^{-d} n0``."""
    _check_gamma(gamma)
    d = params.dim
    Rk = params.Rk.with_rate(params.Rk.rate * gamma ** (d - 2.0)).rescaled(1.0 / gamma)
    Qk = params.Qk.rescaled(1.0 / gamma)
    return replace(params, Rk=Rk, Qk=Qk, n0=params.n0 * gamma ** (-d))


def gstar(eps: float) -> float:
    """Fixed-point coupling ``(4 pi)^{1-eps/2} / Gamma(eps/2)``."""
    half = 0.5 * eps
    if half <= 0 and float(half).is_integer():
        raise PoleError(f"g* vanishes identically (1/Gamma pole) at eps={eps}")
    return (4.0 * math.pi) ** (1.0 - half) / sf.gamma(half)


def vertex_gamma12(k: float, s: float, R: float, d: float) -> float:
    """Local annihilation vertex ``R / (1 + R (s + k^2/2)^{d/2-1} / g*)``."""
    x = s + 0.5 * k * k
    if not x > 0:
        raise ValidationError("vertex_gamma12 needs s + k^2/2 > 0")
    gs = gstar(2.0 - d)
    return R / (1.0 + R / gs * x ** (0.5 * d - 1.0))


def renormalize_g(g: float, eps: float) -> float:
    """``g_r = g / (1 + g/g*)``; ``g = inf`` gives ``g*``."""
    if g < 0:
        raise ValidationError("g must be non-negative")
    gs = gstar(eps)
    if math.isinf(g):
        return gs
    return g / (1.0 + g / gs)


def bare_from_renormalized(g_r: float, eps: float) -> float:
    """Inverse of ``renormalize_g``: ``g = 1 / (1/g_r - 1/g*)``."""
    gs = gstar(eps)
    if g_r == 0:
        return 0.0
    inv = 1.0 / g_r - 1.0 / gs
    if inv <= 0:
        return math.inf
    return 1.0 / inv


def flow_g_r(g_r: float, gamma: float, eps: float) -> float:
    """Renormalised coupling after rescaling by ``gamma``.

    ``g_r(gamma) = g* g_r / (g_r + gamma^eps (g* - g_r))``.
    """
    _check_gamma(gamma)
    gs = gstar(eps)
    if g_r == 0:
        return 0.0
    ge = gamma**eps
    if math.isinf(ge):
        return 0.0
    denom = g_r + ge * (gs - g_r)
    return gs * g_r / denom


def asymptotic_density_model1(t: float, d: float, R: float | None = None) -> float:
    """Leading large-t density of the annihilation model.

    ``d < 2``: ``t^{-d/2} (1/g* - (2C + 5)/(16 pi))`` with C Euler's constant;
    ``d > 2``: ``1/(R t)``.  The marginal d = 2 (logarithms) is not covered.
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    if d == 2:
        raise ValidationError("d = 2 is marginal (logarithmic corrections) and not covered")
    if d < 2:
        return t ** (-0.5 * d) * (1.0 / gstar(2.0 - d) - (2.0 * EULER_GAMMA + 5.0) / (16.0 * math.pi))
    if R is None or not R > 0:
        raise ValidationError("d > 2 needs a positive R")
    return 1.0 / (R * t)


def density_model1_from_gr(t: float, g_r: float, n0: float, kappa: float, d: float) -> float:
    """Mean-field density with R expressed through ``g_r`` at scale ``kappa``."""
    g = bare_from_renormalized(g_r, 2.0 - d)
    R = g * kappa ** (2.0 - d)
    return density_model1(n0, R, t)


@dataclass(frozen=True)
class CSArgsI:
    p: float
    t: float
    g_r: float
    lam: float
    n0: float
    d: float


def cs_rescaled_args_model1(args: CSArgsI, gamma: float) -> tuple[float, CSArgsI]:
    """Prefactor ``gamma^d`` and arguments ``(p gamma, t gamma^2, g_r(gamma), lambda/gamma, n0 gamma^-d)``."""
    _check_gamma(gamma)
    d = args.d
    new = CSArgsI(args.p * gamma, args.t * gamma**2, flow_g_r(args.g_r, gamma, 2.0 - d),
                  args.lam / gamma, args.n0 * gamma ** (-d), d)
    return gamma**d, new


# ---------------------------------------------------------------------------
# Model II


@dataclass(frozen=True)
class ModelIIParams:
    """Coefficients of the generalised Model II action (all D-scaled)."""

    D: float
    R4: float
    R3: float
    Q3: float
    Q2: float
    M: float
    B: float
    lambda_r: float
    lambda_q: float
    dim: float

    @classmethod
    def from_model(cls, params: ModelParams) -> "ModelIIParams":
        r = params.Rk.rate / params.D
        return cls(params.D, r, r, params.Q, params.Q, params.M, params.B,
                   params.Rk.precision, params.Qk.precision, params.dim)

    @property
    def g(self) -> float:
        return math.sqrt(self.R3 * self.Q3)

    @property
    def b(self) -> float:
        return math.sqrt(self.R3 / self.Q3) * self.B


def rescale_model2(params: ModelIIParams, gamma: float) -> ModelIIParams:
    """Rescale with the symmetric field factors that equalise both cubic couplings."""
    _check_gamma(gamma)
    d = params.dim
    if params.R3 <= 0 or params.Q3 <= 0:
        raise ValidationError("symmetric rescaling needs R3 > 0 and Q3 > 0")
    g3 = gamma ** (0.5 * d - 2.0) * math.sqrt(params.R3 * params.Q3)
    return replace(
        params,
        R4=gamma ** (d - 2.0) * params.R4,
        R3=g3,
        Q3=g3,
        Q2=gamma**-2 * params.Q2,
        M=gamma**-2 * params.M,
        B=gamma ** (-2.0 - 0.5 * d) * math.sqrt(params.R3 / params.Q3) * params.B,
        lambda_r=params.lambda_r / gamma,
        lambda_q=params.lambda_q / gamma,
    )


def g_eps(eps: float) -> float:
    """``G_eps = Gamma(1 + eps/2) / (4 pi)^{d/2}`` with d = 4 - eps."""
    return sf.gamma(1.0 + 0.5 * eps) / (4.0 * math.pi) ** (0.5 * (4.0 - eps))


def u_from_g(g: float, eps: float, mu: float) -> float:
    return g_eps(eps) * g * g * mu ** (-eps)


def z_factors(u: float, eps: float) -> tuple[float, float, float, float]:
    """``(Z, Z_D, Z_tau, Z_g)`` to order u^2."""
    if eps == 0:
        raise PoleError("Z-factors have poles at eps = 0")
    e = eps
    Z = 1.0 + u / e + (7.0 / e - 3.0 + 4.5 * LN43) * u * u / (2.0 * e)
    ZD = 1.0 + u / (2.0 * e) + (13.0 / e - 31.0 / 4.0 + 17.5 * LN43) * u * u / (8.0 * e)
    Ztau = 1.0 + 2.0 * u / e + (1.0 / e - 5.0 / 16.0) * 8.0 * u * u / e
    Zg = 1.0 + 4.0 * u / e + (5.0 / e - 7.0 / 4.0) * 4.0 * u * u / e
    return Z, ZD, Ztau, Zg


def beta_u(u: float, eps: float) -> float:
    """``du/dlog(gamma) = -eps u + 6 u^2``."""
    return -eps * u + 6.0 * u * u


def u_flow(u: float, gamma: float, eps: float) -> float:
    """``u eps gamma^-eps / (eps - 6u + 6u gamma^-eps)``; at eps = 0, ``u / (1 - 6 u ln gamma)``."""
    _check_gamma(gamma)
    if eps == 0:
        denom = 1.0 - 6.0 * u * math.log(gamma)
        if not denom > 0:
            raise FlowDomainError("u flow leaves the perturbative domain")
        return u / denom
    gm = gamma ** (-eps)
    if math.isinf(gm):
        # gamma^-eps -> inf: u(gamma) -> eps/6 when u > 0
        return eps / 6.0 if u > 0 else 0.0
    denom = eps - 6.0 * u + 6.0 * u * gm
    if eps * denom <= 0:
        raise FlowDomainError("u flow leaves the perturbative domain (denominator changes sign)")
    return u * eps * gm / denom


def critical_exponents_model2(eps: float) -> dict:
    """Small-gamma scaling exponents of tau, X and b (d = 4 - eps)."""
    d = 4.0 - eps
    return {
        "tau_exp": -2.0 + eps / 4.0,
        "x_exp": -0.5 * d + eps / 12.0,
        "b_exp": 2.0 + 0.5 * d - eps * eps / 144.0 * (7.0 / 4.0 - 8.5 * LN43),
    }


def mean_field_beta_exponent(eps: float) -> float:
    """Density-onset exponent ``1 - eps/6`` (first order in eps)."""
    return 1.0 - eps / 6.0


def tau_gamma(tau: float, u: float, gamma: float, eps: float) -> float:
    ug = u_flow(u, gamma, eps)
    _, ZD, Zt, _ = z_factors(u, eps)
    _, ZDg, Ztg, _ = z_factors(ug, eps)
    return gamma**-2 * tau * (ZDg / ZD) * (Zt / Ztg)


def x_gamma(X: float, u: float, gamma: float, eps: float) -> float:
    d = 4.0 - eps
    ug = u_flow(u, gamma, eps)
    Z = z_factors(u, eps)[0]
    Zg = z_factors(ug, eps)[0]
    return X * gamma ** (-0.5 * d) * (Zg / Z) ** -0.5


def b_gamma(b: float, u: float, gamma: float, eps: float) -> float:
    d = 4.0 - eps
    ug = u_flow(u, gamma, eps)
    Z, ZD, _, _ = z_factors(u, eps)
    Zg, ZDg, _, _ = z_factors(ug, eps)
    return gamma ** (-0.5 * d - 2.0) * b * Zg**-0.5 * ZDg * Z**0.5 / ZD


@dataclass(frozen=True)
class CSArgsII:
    tau: float
    X: float
    u: float
    lam: float
    eps: float


def cs_rescaled_args_model2(args: CSArgsII, gamma: float, mu: float = 1.0) -> tuple[float, CSArgsII]:
    """Prefactor ``mu^{2+d/2} gamma^{b_exp}`` and dimensionless scaled arguments
    ``(tau(gamma)/mu^2, X(gamma)/mu^{d/2}, u(gamma), lambda/(mu gamma))``."""
    _check_gamma(gamma)
    e = args.eps
    d = 4.0 - e
    pref = mu ** (2.0 + 0.5 * d) * gamma ** critical_exponents_model2(e)["b_exp"]
    new = CSArgsII(tau_gamma(args.tau, args.u, gamma, e) / mu**2,
                   x_gamma(args.X, args.u, gamma, e) / mu ** (0.5 * d),
                   u_flow(args.u, gamma, e), args.lam / (mu * gamma), e)
    return pref, new


def flow_table_model1(g_r: float, eps: float, gammas) -> np.ndarray:
    """Rows ``(gamma, g_r(gamma))``."""
    return np.array([[gm, flow_g_r(g_r, gm, eps)] for gm in gammas])


def flow_table_model2(u: float, tau: float, X: float, b: float, eps: float, gammas) -> np.ndarray:
    """Rows ``(gamma, u, tau, X, b)`` at each gamma."""
    rows = []
    for gm in gammas:
        rows.append([gm, u_flow(u, gm, eps), tau_gamma(tau, u, gm, eps),
                     x_gamma(X, u, gm, eps), b_gamma(b, u, gm, eps)])
    return np.array(rows)
