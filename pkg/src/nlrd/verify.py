"""Numerical acceptance checks, one function per criterion.

Each check returns a ``Check`` with a target, the measured value, the
tolerance and a pass flag.  ``verify_suite('fast')`` runs every check
that does not need particle simulation; ``'full'`` adds the simulation
studies.  Independent oracles used here (``scipy.integrate.quad`` and
``solve_ivp``) are deliberately different from the routines under test.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from . import loops, meanfield, rgflow, simulator
from .errors import DivergenceError, NLRDError
from .kernels import Kernel, Profile
from .propagators import PropagatorParams
from .trace import log_spaced_times


@dataclass
class Check:
    name: str
    target: str
    measured: float
    tol: float
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def report(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: measured={self.measured:.6g} target={self.target} tol={self.tol:g}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        out.seconds = time.perf_counter() - t0
        return out
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# 1. Fourier pairs


_FT_CUTOFF = {Profile.NORMAL: 9.0, Profile.SCREENED: 80.0, Profile.SPHERICAL: 1.0}


def numeric_fourier(kernel: Kernel, k: float) -> float:
    """Radial Fourier transform of the real-space profile by oscillatory quadrature (d = 1, 3)."""
    d = kernel.dim
    hi = _FT_CUTOFF[kernel.profile] / kernel.precision
    def f(r):
        # the screened profile is singular at the origin for d >= 2; r f(r) stays finite
        return kernel.real_space(r) if r > 0 else 0.0
    with warnings.catch_warnings():
        # QAWO flags roundoff once the estimate reaches machine precision
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _numeric_fourier(f, d, hi, k)


def _numeric_fourier(f, d: float, hi: float, k: float) -> float:
    if d == 1:
        val, _ = integrate.quad(f, 0.0, hi, weight="cos", wvar=k, limit=500, epsabs=1e-15, epsrel=1e-12)
        return 2.0 * val
    if d == 3:
        val, _ = integrate.quad(lambda r: r * f(r), 0.0, hi, weight="sin", wvar=k, limit=500,
                                epsabs=1e-15, epsrel=1e-12)
        return 4.0 * math.pi / k * val
    raise ValueError("numeric_fourier supports d = 1 and 3")


@_timed
def check_fourier_pairs() -> Check:
    worst = 0.0
    rows = []
    for prof in (Profile.NORMAL, Profile.SCREENED, Profile.SPHERICAL):
        for d in (1.0, 3.0):
            for lam in (0.5, 2.0):
                K = Kernel(prof, 1.3, lam, d)
                for x in (0.3, 0.9, 1.7, 2.6, 4.0):
                    k = x * lam
                    exact = K.momentum_space(k)
                    num = numeric_fourier(K, k)
                    rel = abs(num - exact) / abs(exact)
                    worst = max(worst, rel)
                    rows.append((prof.value, d, lam, k, rel))
    return Check("1 kernel Fourier pairs", "max relative error", worst, 1e-6, worst <= 1e-6,
                 {"n_points": len(rows)})


# ---------------------------------------------------------------------------
# 2. I2 closed forms against quadrature


@_timed
def check_i2_oracle() -> Check:
    worst = 0.0
    for d in (1.0, 2.5, 3.0, 4.0):
        for lam in (0.5, 2.0):
            for t in (0.1, 1.0, 10.0):
                for prof, closed in ((Profile.NORMAL, loops.i2_normal_closed),
                                     (Profile.SCREENED, loops.i2_screened_closed)):
                    q = loops.i2_quadrature(Kernel(prof, 1.0, lam, d), 1.0, d, t).value
                    c = closed(1.0, lam, 1.0, d, t).value
                    worst = max(worst, abs(c - q) / abs(q))
    probe = 0.0
    for dstar in (2.0, 4.0):
        for closed in (loops.i2_normal_closed, loops.i2_screened_closed):
            ref = closed(1.0, 1.0, 1.0, dstar, 1.0).value
            for dd in (dstar - 1e-7, dstar + 1e-7):
                probe = max(probe, abs(closed(1.0, 1.0, 1.0, dd, 1.0).value - ref) / abs(ref))
    ok = worst <= 1e-6 and probe <= 1e-4
    return Check("2 I2 closed forms vs quadrature", "relative deviation (grid 1e-6, probes 1e-4)",
                 worst, 1e-6, ok, {"limit_probe_deviation": probe})


# ---------------------------------------------------------------------------
# 3. UV regulation ordering


def _raises_divergence(fn) -> bool:
    try:
        fn()
    except DivergenceError:
        return True
    return False


@_timed
def check_uv_ordering() -> Check:
    local3 = _raises_divergence(lambda: loops.i2(Kernel(Profile.LOCAL, 1.0, 1.0, 3.0), 1.0, 1.0))
    local3q = _raises_divergence(lambda: loops.i2_quadrature(Kernel(Profile.LOCAL, 1.0, 1.0, 3.0), 1.0, 3.0, 1.0))
    scr3 = loops.i2(Kernel(Profile.SCREENED, 1.0, 1.0, 3.0), 1.0, 1.0).value
    nor3 = loops.i2(Kernel(Profile.NORMAL, 1.0, 1.0, 3.0), 1.0, 1.0).value
    nor6 = loops.i2_normal_closed(1.0, 1.0, 1.0, 6.0, 1e-3).value
    scr6 = _raises_divergence(lambda: loops.i2_screened_closed(1.0, 1.0, 1.0, 6.0, 1e-3))
    ok = local3 and local3q and math.isfinite(scr3) and math.isfinite(nor3) and math.isfinite(nor6) and scr6
    return Check("3 UV regulation ordering", "local d=3 diverges; normal finite d<=6; screened diverges d=6",
                 float(ok), 0.0, ok,
                 {"local_d3_diverges": local3 and local3q, "screened_d3": scr3, "normal_d3": nor3,
                  "normal_d6": nor6, "screened_d6_diverges": scr6})


# ---------------------------------------------------------------------------
# 4. effective-coupling scaling


@_timed
def check_effective_coupling_local() -> Check:
    t = np.geomspace(10.0, 1e3, 9)
    slopes = {}
    for name, K in (("local", Kernel(Profile.LOCAL, 1.0, 1.0, 1.0)),
                    ("normal_lambda100", Kernel(Profile.NORMAL, 1.0, 100.0, 1.0))):
        vals = [loops.effective_coupling(K, 1.0, 1.0, tt) for tt in t]
        slopes[name] = _slope(t, vals)
    dev = max(abs(s - 0.5) for s in slopes.values())
    return Check("4a I2/I1 slope, local-limit kernels, d=1", "0.5", dev, 0.01, dev <= 0.01, slopes)


def _spherical_series(d: float, lam: float, t: np.ndarray):
    K = Kernel(Profile.SPHERICAL, 1.0, lam, d)
    i2 = np.array([loops.i2_quadrature(K, 1.0, d, tt).value for tt in t])
    return K, i2


@_timed
def check_effective_coupling_spherical() -> Check:
    """Log-log slope of I2/I1 for the spherical kernel at small t (target 3/2)."""
    t = np.geomspace(1e-4, 1e-2, 9)
    slopes = {}
    for d in (1.0, 2.0, 3.0):
        _, i2 = _spherical_series(d, 1.0, t)
        slopes[f"d={d:g}"] = _slope(t, i2 / t)
    dev = max(abs(s - 1.5) for s in slopes.values())
    return Check("4b I2/I1 slope, spherical, small t", "1.5", dev, 0.05, dev <= 0.05, slopes)


@_timed
def check_spherical_remainder() -> Check:
    """Slope of the non-analytic part ``I2/I1 - t lam^d/(2 V_d)`` for the spherical kernel."""
    from .specialfns import ball_volume
    t = np.geomspace(1e-4, 1e-2, 9)
    slopes = {}
    for d in (1.0, 2.0, 3.0):
        _, i2 = _spherical_series(d, 1.0, t)
        rem = i2 / t - t / (2.0 * ball_volume(d))
        slopes[f"d={d:g}"] = _slope(t, np.abs(rem))
    dev = max(abs(s - 1.5) for s in slopes.values())
    return Check("4c spherical I2/I1 remainder slope (supplementary)", "1.5", dev, 0.05, dev <= 0.05, slopes)


# ---------------------------------------------------------------------------
# 5. Model I flow


@_timed
def check_model1_flow() -> Check:
    rng = np.random.default_rng(12345)
    comp = 0.0
    for eps in (1.0, 0.5, -1.0):
        gs = rgflow.gstar(eps)
        for _ in range(50):
            g_r = gs * rng.uniform(0.05, 0.95)
            g1, g2 = np.exp(rng.uniform(-3, 3, 2))
            a = rgflow.flow_g_r(rgflow.flow_g_r(g_r, g1, eps), g2, eps)
            b = rgflow.flow_g_r(g_r, g1 * g2, eps)
            comp = max(comp, abs(a - b) / abs(b))
    fp = 0.0
    gs1 = rgflow.gstar(1.0)
    for frac in (0.5, 0.75, 0.9):
        fp = max(fp, abs(rgflow.flow_g_r(frac * gs1, 1e-6, 1.0) - gs1) / abs(gs1))
    fp0 = 0.0
    for eps in (-1.0, -1.5):
        fp0 = max(fp0, abs(rgflow.flow_g_r(0.5, 1e-6, eps)))
    sol = integrate.solve_ivp(lambda s, u: [rgflow.beta_u(u[0], 1.0)], (0.0, math.log(0.1)), [0.02],
                              method="DOP853", rtol=1e-13, atol=1e-16)
    ode = abs(sol.y[0, -1] - rgflow.u_flow(0.02, 0.1, 1.0))
    ok = comp <= 1e-12 and fp <= 1e-6 and fp0 <= 1e-6 and ode <= 1e-8
    return Check("5 Model I flow", "composition 1e-12; fixed points 1e-6; u ODE 1e-8", comp, 1e-12, ok,
                 {"fixed_point_gstar": fp, "fixed_point_zero": fp0, "u_flow_vs_ode": ode})


# ---------------------------------------------------------------------------
# 6. mean-field rescaling identity


@_timed
def check_cs_identity() -> Check:
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        n0 = math.exp(rng.uniform(-3, 3))
        R = math.exp(rng.uniform(-3, 3))
        t = math.exp(rng.uniform(-3, 3))
        d = rng.uniform(1.0, 3.0)
        gm = math.exp(rng.uniform(-2, 2))
        lhs = gm**d * meanfield.density_model1(n0 * gm**-d, R * gm ** (d - 2.0), t * gm * gm)
        rhs = meanfield.density_model1(n0, R, t)
        worst = max(worst, abs(lhs - rhs) / rhs)
    return Check("6 Model I rescaling identity", "relative deviation", worst, 1e-12, worst <= 1e-12)


# ---------------------------------------------------------------------------
# 7-10. simulations


def _record(t_max: float) -> tuple:
    return tuple(np.concatenate([[0.0], log_spaced_times(1.0, t_max, 10)]))


def _decay_config(kernel: Kernel, n0: float, L: float, t_max: float, seed: int) -> simulator.SimConfig:
    params = meanfield.ModelParams.model1(1.0, kernel, n0)
    return simulator.SimConfig(params, box=L, t_max=t_max, record_times=_record(t_max), seed=seed)


def _d1_run(kernel: Kernel, replicas: int, seed: int):
    cfg = _decay_config(kernel, 1.0, 1e4, 1e4, seed)
    tr = simulator.run_replicas(cfg, replicas)
    return simulator.fit_decay_exponent(tr, 1e2, 1e4)


@_timed
def check_sim_d1(replicas: int = 32) -> Check:
    fit = _d1_run(Kernel(Profile.NORMAL, 2.0, 1.0, 1.0), replicas, 101)
    dev = abs(fit["slope"] + 0.5)
    sigma_mf = (fit["slope"] + 1.0) / fit["stderr"]
    ok = dev <= 0.06 and sigma_mf > 5.0
    return Check("7 simulated d=1 decay exponent", "-0.5", fit["slope"], 0.06, ok,
                 {**fit, "mean_field_exclusion_sigma": sigma_mf})


@_timed
def check_sim_d3(replicas: int = 16) -> Check:
    cfg = _decay_config(Kernel(Profile.SPHERICAL, 2.0, 1.0, 3.0), 0.5, 60.0, 1e3, 303)
    fit = simulator.fit_decay_exponent(simulator.run_replicas(cfg, replicas), 10.0, 1e3)
    return Check("8 simulated d=3 decay exponent", "-1.0", fit["slope"], 0.1,
                 abs(fit["slope"] + 1.0) <= 0.1, fit)


@_timed
def check_sim_universality(replicas: int = 32) -> Check:
    normal = _d1_run(Kernel(Profile.NORMAL, 2.0, 1.0, 1.0), replicas, 101)
    # equal per-component variance 1/2: 1/(lam^2 (d+2)) = 1/2
    sph = _d1_run(Kernel(Profile.SPHERICAL, 2.0, math.sqrt(2.0 / 3.0), 1.0), replicas, 909)
    joint = math.hypot(normal["stderr"], sph["stderr"])
    diff = abs(normal["slope"] - sph["slope"])
    return Check("9 kernel universality (normal vs spherical, d=1)", "|slope difference| <= 2 joint sigma",
                 diff, 2.0 * joint, diff <= 2.0 * joint,
                 {"normal": normal, "spherical": sph, "joint_sigma": joint})


@_timed
def check_sim_steady_state(replicas: int = 2) -> Check:
    results = {}
    worst = 0.0
    for label, B in (("B=0", 0.0), ("B>0", 0.001)):
        params = meanfield.ModelParams(10.0, Kernel(Profile.SPHERICAL, 1.0, 1.0, 3.0),
                                       Kernel(Profile.NORMAL, 0.01, 1.0, 3.0), 0.0, B, 0.1, 3.0)
        root = meanfield.steady_state_model2(params)
        target = abs(params.tau) / params.R if B == 0.0 else root
        cfg = simulator.SimConfig(params, box=30.0, t_max=100.0, seed=505,
                                  record_times=tuple(np.linspace(0.0, 100.0, 41)))
        tr = simulator.run_replicas(cfg, replicas)
        plateau = float(tr.densities[tr.window(50.0, 100.0)].mean())
        rel = abs(plateau - target) / target
        worst = max(worst, rel)
        results[label] = {"plateau": plateau, "target": target, "mean_field_root": root,
                          "relative_deviation": rel}
    return Check("10 Model II steady-state plateau", "mean-field steady state", worst, 0.15, worst <= 0.15, results)


# ---------------------------------------------------------------------------
# 11. Model II flow


@_timed
def check_model2_flow() -> Check:
    ufix = abs(rgflow.u_flow(0.1, 1e-12, 1.0) - 1.0 / 6.0)
    h = 1e-4
    worst = 0.0
    ln43 = math.log(4.0 / 3.0)
    for eps in (1.0, 0.5, 2.0):
        printed = [
            (1.0 / eps, (7.0 / eps - 3.0 + 4.5 * ln43) / (2.0 * eps)),
            (1.0 / (2.0 * eps), (13.0 / eps - 31.0 / 4.0 + 17.5 * ln43) / (8.0 * eps)),
            (2.0 / eps, (1.0 / eps - 5.0 / 16.0) * 8.0 / eps),
            (4.0 / eps, (5.0 / eps - 7.0 / 4.0) * 4.0 / eps),
        ]
        zp = rgflow.z_factors(h, eps)
        zm = rgflow.z_factors(-h, eps)
        z0 = rgflow.z_factors(0.0, eps)
        for i, (c1, c2) in enumerate(printed):
            d1 = (zp[i] - zm[i]) / (2 * h)
            d2 = (zp[i] - 2 * z0[i] + zm[i]) / (2 * h * h)
            worst = max(worst, abs(d1 - c1) / abs(c1), abs(d2 - c2) / max(abs(c2), 1.0), abs(z0[i] - 1.0))
    ex = rgflow.critical_exponents_model2(0.0)
    mf = ex == {"tau_exp": -2.0, "x_exp": -2.0, "b_exp": 4.0}
    ok = ufix <= 1e-8 and worst <= 1e-6 and mf
    return Check("11 Model II flow", "u(gamma->0)=1/6 (1e-8); Z coefficients (1e-6); mean-field exponents",
                 ufix, 1e-8, ok, {"z_coefficient_deviation": worst, "eps0_exponents": ex})


# ---------------------------------------------------------------------------
# 12. two-loop IR scaling


TWO_LOOP_LAMBDA = 100.0


@_timed
def check_two_loop_scaling() -> Check:
    d, Q, g, X = 3.5, 0.5, 1.0, 0.1
    eps = 4.0 - d
    taus = np.geomspace(1e-3, 1e-1, 5)
    slopes = {}
    for angular in ("local_q", "mean_angle"):
        vals = []
        for tb in taus:
            p = PropagatorParams(1.0, tb + Q - 2 * g * X, Kernel(Profile.SCREENED, Q, TWO_LOOP_LAMBDA, d),
                                 Kernel(Profile.SCREENED, 1.0, TWO_LOOP_LAMBDA, d), g, X)
            vals.append(abs(loops.two_loop_tadpole(p, d, angular).value))
        slopes[angular] = _slope(taus, vals)
    dev = max(abs(s + eps) for s in slopes.values())
    return Check("12 two-loop tadpole IR scaling", f"-{eps}", dev, 0.1, dev <= 0.1,
                 {**slopes, "lambda": TWO_LOOP_LAMBDA})


# ---------------------------------------------------------------------------
# 13. one-loop density collapse


@_timed
def check_x1_collapse() -> Check:
    vals = []
    for gm in (1.0, 0.5, 0.25):
        # base point lambda = R = n0 = 1, t = 10 in d = 1, rescaled by gamma
        K = Kernel(Profile.NORMAL, 1.0 / gm, 1.0 / gm, 1.0)
        r = loops.x1_loop(10.0 * gm * gm, K, 1.0 / gm, 1.0)
        vals.append((gm * r.value, gm * r.est_error))
    worst = 0.0
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            worst = max(worst, abs(vals[i][0] - vals[j][0]) / (vals[i][1] + vals[j][1]))
    return Check("13 one-loop density rescaling collapse",
                 "pairwise difference / combined quadrature error", worst, 1.0, worst <= 1.0,
                 {"values": [v[0] for v in vals], "errors": [v[1] for v in vals]})


FAST_CHECKS = (check_fourier_pairs, check_i2_oracle, check_uv_ordering, check_effective_coupling_local,
               check_effective_coupling_spherical, check_spherical_remainder, check_model1_flow,
               check_cs_identity, check_model2_flow, check_two_loop_scaling, check_x1_collapse)
SIM_CHECKS = (check_sim_d1, check_sim_d3, check_sim_universality, check_sim_steady_state)


def verify_suite(level: str = "fast") -> dict:
    """Run the checks for ``level`` ('fast' or 'full'); failures become report entries."""
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    checks = FAST_CHECKS + (SIM_CHECKS if level == "full" else ())
    entries = []
    for fn in checks:
        try:
            c = fn()
        except (NLRDError, ArithmeticError, ValueError) as exc:
            c = Check(fn.__name__, "no error", math.nan, 0.0, False, {"error": f"{type(exc).__name__}: {exc}"})
        entries.append(c.report())
    return {"level": level, "checks": entries, "all_pass": all(e["pass"] for e in entries)}
