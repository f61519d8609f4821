"""Tree-level densities and the loop-corrected equation of state.

Unit convention for ``ModelParams``: ``Rk.rate`` is the physical pair
annihilation rate R (volume/time).  ``Qk.rate`` (branching), ``M`` (death)
and ``B`` (birth) are stored divided by D, so the physical rates are
``D*Q``, ``D*M`` and ``D*B`` and ``tau = D*(M - Q)``.

Sign convention: by default annihilation removes particles,

    dX/dt = D*B - tau*X - R*X^2,

with the non-negative stable root of ``D*B = X*(tau + R*X)`` as steady
state (active phase for tau < 0).  ``flipped_annihilation_sign=True`` integrates the
alternative ``dX/dt = D*B + R*X^2 - tau*X`` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from . import specialfns as sf
from .errors import BlowUpError, CriticalPointError, NumericalError, PoleError, ValidationError
from .kernels import Kernel, Profile
from .trace import DensityTrace


class NoSteadyStateError(NumericalError):
    kind = "no_nonnegative_root"


@dataclass(frozen=True)
class ModelParams:
    D: float
    Rk: Kernel
    Qk: Kernel
    M: float = 0.0
    B: float = 0.0
    n0: float = 0.0
    dim: float = 1.0

    def __post_init__(self):
        if not self.D > 0:
            raise ValidationError("D must be positive")
        if self.M < 0 or self.B < 0 or self.n0 < 0:
            raise ValidationError("M, B and n0 must be non-negative")
        if self.Rk.dim != self.dim or self.Qk.dim != self.dim:
            raise ValidationError("kernel dimensions must equal the model dimension")

    @property
    def R(self) -> float:
        return self.Rk.rate

    @property
    def Q(self) -> float:
        return self.Qk.rate

    @property
    def tau(self) -> float:
        """Physical control rate D*(M - Q)."""
        return self.D * (self.M - self.Q)

    @classmethod
    def model1(cls, D: float, Rk: Kernel, n0: float) -> "ModelParams":
        return cls(D, Rk, Kernel(Profile.LOCAL, 0.0, 1.0, Rk.dim), 0.0, 0.0, n0, Rk.dim)

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


def density_model1(n0, R, t):
    """Mean-field pure-annihilation density ``n0 / (1 + R n0 t)``."""
    n0 = np.asarray(n0, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(n0 < 0) or np.any(np.asarray(R) < 0) or np.any(t < 0):
        raise ValidationError("density_model1 needs n0, R, t >= 0")
    out = n0 / (1.0 + R * n0 * t)
    return float(out) if np.ndim(out) == 0 else out


def _riccati_rhs(params: ModelParams, flipped_annihilation_sign: bool):
    DB = params.D * params.B
    tau = params.tau
    R = params.R
    if flipped_annihilation_sign:
        return lambda t, x: DB + R * x * x - tau * x
    return lambda t, x: DB - tau * x - R * x * x


def density_model2_ode(params: ModelParams, t_grid, flipped_annihilation_sign: bool = False,
                       rtol: float = 1e-11, atol: float = 1e-14) -> DensityTrace:
    """Integrate the Riccati equation for the mean-field Model II density."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1 or t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValidationError("t_grid must be increasing and start at 0")
    if t_grid.size == 1:
        return DensityTrace(t_grid, np.array([params.n0]))
    f = _riccati_rhs(params, flipped_annihilation_sign)
    scale = max(params.n0, 1.0, abs(params.tau) / params.R if params.R > 0 else 1.0,
                math.sqrt(params.D * params.B / params.R) if params.R > 0 else 1.0)
    limit = 1e12 * scale

    def blow(t, x):
        return limit - abs(x[0])
    blow.terminal = True

    sol = solve_ivp(lambda t, x: [f(t, x[0])], (0.0, t_grid[-1]), [params.n0], method="DOP853",
                    t_eval=t_grid, rtol=rtol, atol=atol * scale, events=blow)
    if sol.status == 1 or (sol.y.shape[1] < t_grid.size):
        raise BlowUpError(f"density diverges near t={sol.t[-1]:.6g}")
    if not sol.success:
        raise NumericalError(f"ODE integration failed: {sol.message}")
    x = sol.y[0]
    # tiny negative excursions are integration noise around the absorbing state
    x = np.where((x < 0) & (x > -1e3 * atol * scale), 0.0, x)
    return DensityTrace(t_grid, x)


def steady_state_model2(params: ModelParams, flipped_annihilation_sign: bool = False) -> float:
    """Mean-field steady-state density of Model II."""
    R, tau, DB = params.R, params.tau, params.D * params.B
    if R == 0 and tau == 0:
        raise ValidationError("steady state undefined for R = 0 and tau = 0")
    if not flipped_annihilation_sign:
        if R == 0:
            if tau < 0:
                raise NoSteadyStateError("unbounded growth: tau < 0 with no annihilation")
            return DB / tau
        if DB == 0:
            return max(0.0, -tau / R)
        # stable root of R X^2 + tau X - DB = 0, written without cancellation
        disc = math.sqrt(tau * tau + 4.0 * R * DB)
        if tau >= 0:
            return 2.0 * DB / (tau + disc)
        return (-tau + disc) / (2.0 * R)
    # literal root of D B = X (tau - R X), larger branch
    if R == 0:
        if tau <= 0:
            raise NoSteadyStateError("no non-negative root")
        return DB / tau
    if DB == 0:
        return tau / R if tau >= 0 else 0.0
    disc2 = tau * tau - 4.0 * R * DB
    if disc2 < 0 or tau < 0:
        raise NoSteadyStateError("no non-negative root of D B = X (tau - R X)")
    return (tau + math.sqrt(disc2)) / (2.0 * R)


# ---------------------------------------------------------------------------
# equation of state


def _one_loop_c(eps: float, g: float, taubar: float) -> float:
    d = 4.0 - eps
    return 4.0 * g * g * taubar ** (1.0 - 0.5 * eps) * sf.gamma(1.0 + 0.5 * eps) / (4.0 * math.pi) ** (0.5 * d)


def one_loop_term(eps: float, g: float, taubar: float, pole_subtracted: bool = False) -> float:
    """``4 g^2 taubar^{1-eps/2} Gamma(1+eps/2) / ((4 pi)^{d/2} eps (2-eps))``.

    The term has simple poles at eps = 0 and eps = 2.  With
    ``pole_subtracted`` both poles are removed by minimal subtraction,
    ``c(0)/(2 eps) + c(2)/(2 (2-eps))``, leaving a function that is
    finite and continuous through eps = 0 and 2 (limits evaluated
    analytically there).
    """
    if taubar <= 0:
        raise CriticalPointError("taubar must be positive")
    if not pole_subtracted:
        if eps == 0.0 or eps == 2.0:
            raise PoleError(f"one-loop term has a pole at eps={eps}")
        return _one_loop_c(eps, g, taubar) / (eps * (2.0 - eps))
    c0 = _one_loop_c(0.0, g, taubar)
    c2 = _one_loop_c(2.0, g, taubar)

    def dc(e):
        # d/d eps of c(eps)
        return _one_loop_c(e, g, taubar) * (-0.5 * math.log(taubar) + 0.5 * sf.digamma(1.0 + 0.5 * e)
                                             + 0.5 * math.log(4.0 * math.pi))
    if abs(eps) < 1e-7:
        return 0.5 * dc(0.0) + 0.25 * c0 - 0.25 * c2
    if abs(eps - 2.0) < 1e-7:
        return -0.5 * dc(2.0) + 0.25 * c2 - 0.25 * c0
    c = _one_loop_c(eps, g, taubar)
    return c / (eps * (2.0 - eps)) - c0 / (2.0 * eps) - c2 / (2.0 * (2.0 - eps))


def equation_of_state(X: float, tau: float, g: float, eps: float, I1: float, I2: float,
                      pole_subtracted: bool = False) -> float:
    """Source ``b`` balancing the tadpoles at mean density X (local interactions).

    All rates are D-scaled: ``tau = M - Q`` and ``taubar = tau + 2 g X``.
    ``I1`` and ``I2`` are the two-loop constants, required inputs.
    """
    taubar = tau + 2.0 * g * X
    if taubar <= 0:
        raise CriticalPointError(f"taubar = {taubar} <= 0: at or beyond the critical point")
    loop1 = one_loop_term(eps, g, taubar, pole_subtracted) if g != 0 else 0.0
    loop2 = (2.0 * g**4 / 3.0) * taubar ** (-eps) * (g * X * (1.0 - eps) * I1 + (2.0 * I1 + 3.0 * I2) * taubar)
    return X * (taubar - g * X - loop1 + loop2)
