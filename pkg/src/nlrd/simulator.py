"""Discrete-time particle simulation of annihilation, branching, death and birth.

Particles diffuse in a periodic box ``[0, L)^d``.  Each step applies, in
order: diffusion, pairwise annihilation with probability
``1 - exp(-R(|p - q|) dt)`` (minimum-image distance, cell-list search,
conflicts resolved in random pair order), death, branching with the
offspring displaced by a draw from ``Qhat`` and Poisson birth.

Model rates follow ``ModelParams``: ``Rk.rate`` is physical, while M, Q
and B are D-scaled and enter as ``D*M``, ``D*Q`` and ``D*B``.  A local
annihilation kernel is simulated as a spherical kernel of precision
``local_lambda``, which keeps the total rate R.

Replica ``i`` of a run seeded with ``s`` uses a Philox generator seeded
with ``s ^ i``.  The thread count for replica runs is read from the
``NLRD_THREADS`` environment variable.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _simcore as core
from . import specialfns as sf
from .errors import CapacityError, NumericalError, ValidationError
from .io import config_digest
from .kernels import Kernel, Profile
from .meanfield import ModelParams, NoSteadyStateError, steady_state_model2
from .trace import DensityTrace, log_spaced_times

SNAPSHOT_MAGIC = b"NLRD"
_CODES = {Profile.LOCAL: core.LOCAL, Profile.NORMAL: core.NORMAL,
          Profile.SCREENED: core.SCREENED, Profile.SPHERICAL: core.SPHERICAL}
_TABLE_SIZE = 8192


class InsufficientDataError(NumericalError):
    kind = "insufficient_data"


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    box: float
    t_max: float
    dt: float | None = None
    record_times: tuple | None = None
    seed: int = 0
    pair_tol: float = 1e-6
    max_particles: int = 10_000_000
    local_lambda: float = 10.0

    def __post_init__(self):
        d = self.params.dim
        if d not in (1, 2, 3):
            raise ValidationError("the simulator supports d in {1, 2, 3}")
        if not self.box > 0 or not self.t_max > 0:
            raise ValidationError("box and t_max must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not 0 < self.pair_tol < 1:
            raise ValidationError("pair_tol must lie in (0, 1)")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.max_particles < 1:
            raise ValidationError("max_particles must be positive")
        if self.params.R > 0:
            rc = self.interaction_radius
            if not self.box > 2.0 * rc:
                raise ValidationError(f"box {self.box} too small for interaction radius {rc:.4g}")

    @property
    def dim(self) -> int:
        return int(self.params.dim)

    @property
    def sim_kernel(self) -> Kernel:
        """Annihilation kernel as simulated (local replaced by spherical)."""
        Rk = self.params.Rk
        if Rk.profile is Profile.LOCAL:
            return Kernel(Profile.SPHERICAL, Rk.rate, self.local_lambda, Rk.dim)
        return Rk

    @property
    def interaction_radius(self) -> float:
        return self.sim_kernel.truncation_radius(self.pair_tol)

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else default_dt(self)

    def to_dict(self) -> dict:
        p = self.params
        return {"params": {"D": p.D, "dim": p.dim, "annihilation": p.Rk.to_config(),
                           "branching": p.Qk.to_config(), "M_over_D": p.M, "B_over_D": p.B, "n0": p.n0},
                "box": self.box, "t_max": self.t_max, "dt": self.dt,
                "record_times": None if self.record_times is None else [float(t) for t in self.record_times],
                "seed": self.seed, "pair_tol": self.pair_tol, "max_particles": self.max_particles,
                "local_lambda": self.local_lambda}

    def digest(self) -> str:
        return config_digest(self.to_dict())

    def sample_times(self) -> np.ndarray:
        if self.record_times is not None:
            t = np.asarray(self.record_times, dtype=float)
            if np.any(t < 0) or np.any(t > self.t_max * (1 + 1e-12)) or np.any(np.diff(t) <= 0):
                raise ValidationError("record_times must be increasing within [0, t_max]")
            return t
        return np.concatenate([[0.0], log_spaced_times(min(1.0, self.t_max / 10.0), self.t_max, 10)])


def _mean_density(params: ModelParams) -> float:
    nbar = params.n0
    if params.B > 0 or params.Q > 0:
        try:
            nbar = max(nbar, steady_state_model2(params))
        except (NoSteadyStateError, ValidationError):
            pass
    return nbar


def default_dt(config: SimConfig) -> float:
    """``min(0.1/(R lam^d nbar r_c^d / V_d), 0.05/(D lam^2), 0.1/(D max(M, Q, B L^d/N)))``."""
    p = config.params
    d = config.dim
    L = config.box
    nbar = _mean_density(p)
    cands = []
    K = config.sim_kernel
    if p.R > 0:
        rc = config.interaction_radius
        x = p.R * K.precision**d / sf.ball_volume(d) * max(nbar, 1.0 / L**d) * rc**d
        if x > 0:
            cands.append(0.1 / x)
        cands.append(0.05 / (p.D * K.precision**2))
    if not p.Qk.is_local and p.Q > 0:
        cands.append(0.05 / (p.D * p.Qk.precision**2))
    N = max(nbar * L**d, 1.0)
    rmax = max(p.M, p.Q, p.B * L**d / N)
    if rmax > 0:
        cands.append(0.1 / (p.D * rmax))
    if not cands:
        return config.t_max / 100.0
    return min(min(cands), config.t_max)


def _screened_table(K: Kernel, rc: float, dt: float):
    h = math.sqrt(rc) / (_TABLE_SIZE - 1)
    r = (np.arange(_TABLE_SIZE) * h) ** 2
    with np.errstate(over="ignore"):
        dens = K.normalized_real(r)
    prob = -np.expm1(-K.rate * np.asarray(dens) * dt)
    prob[~np.isfinite(prob)] = 1.0
    return h, prob


@dataclass
class SimState:
    positions: np.ndarray
    t: float
    rng: np.random.Generator
    steps: int = 0

    @property
    def count(self) -> int:
        return self.positions.shape[0]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def init_poisson(config: SimConfig, rng: np.random.Generator) -> SimState:
    """Poisson(n0 L^d) particles placed uniformly in the box."""
    d = config.dim
    mean = config.params.n0 * config.box**d
    n = int(rng.poisson(mean)) if mean > 0 else 0
    if n > config.max_particles:
        raise CapacityError(f"initial particle count {n} exceeds max_particles")
    pos = rng.random((n, d)) * config.box
    return SimState(pos, 0.0, rng)


class _Prepared:
    """Step constants shared by all replicas of one configuration."""

    def __init__(self, config: SimConfig):
        p = config.params
        self.d = config.dim
        self.L = float(config.box)
        self.D = float(p.D)
        self.dt = float(config.time_step)
        K = config.sim_kernel
        self.r_code = _CODES[K.profile]
        self.r_rate = float(K.rate)
        self.r_lam = float(K.precision)
        self.vol_d = sf.ball_volume(self.d)
        if K.rate > 0:
            self.r_c = float(config.interaction_radius)
        else:
            self.r_c = 1.0
        if self.r_code == core.SCREENED and K.rate > 0:
            self.table_h, self.table = _screened_table(K, self.r_c, self.dt)
        else:
            self.table_h, self.table = 1.0, np.zeros(2)
        self.q_code = _CODES[p.Qk.profile]
        self.q_lam = float(p.Qk.precision) if not p.Qk.is_local else 1.0
        self.p_death = -math.expm1(-p.D * p.M * self.dt)
        self.p_branch = -math.expm1(-p.D * p.Q * self.dt)
        self.birth_mean = p.D * p.B * self.L**self.d * self.dt
        self.max_particles = int(config.max_particles)

    def advance(self, state: SimState, n_steps: int, record_steps: np.ndarray) -> np.ndarray:
        n = state.count
        buf = np.empty((max(2 * n, 1024), self.d))
        buf[:n] = state.positions
        counts = np.zeros(record_steps.size, dtype=np.int64)
        status, n, buf, done = core.run_core(
            buf, n, self.d, self.L, self.D, self.dt, int(n_steps), record_steps, counts,
            self.r_code, self.r_rate, self.r_lam, self.r_c, self.vol_d, self.table_h, self.table,
            self.q_code, self.q_lam, self.p_death, self.p_branch, self.birth_mean,
            self.max_particles, state.rng)
        state.positions = buf[:n].copy()
        state.steps += int(done)
        state.t = state.steps * self.dt
        if status == core.STATUS_CAPACITY:
            raise CapacityError(f"particle count exceeded max_particles={self.max_particles} "
                                f"at t={state.t:.6g} (supercritical growth)")
        return counts


def step(state: SimState, config: SimConfig) -> SimState:
    """Advance ``state`` by one timestep in place and return it."""
    _Prepared(config).advance(state, 1, np.zeros(0, dtype=np.int64))
    return state


def _record_steps(config: SimConfig, dt: float):
    times = config.sample_times()
    steps = np.rint(times / dt).astype(np.int64)
    steps = np.unique(steps)
    return steps, int(math.ceil(config.t_max / dt - 1e-9))


def _run_one(config: SimConfig, prep: _Prepared, seed: int, initial: np.ndarray | None = None):
    rng = make_rng(seed)
    state = init_poisson(config, rng) if initial is None else SimState(np.array(initial, dtype=float), 0.0, rng)
    steps, n_steps = _record_steps(config, prep.dt)
    n_steps = max(n_steps, int(steps[-1]) if steps.size else 0)
    counts = prep.advance(state, n_steps, steps)
    return steps * prep.dt, counts / config.box**config.dim, state


def run(config: SimConfig, initial: np.ndarray | None = None) -> DensityTrace:
    """Single realisation with the configuration seed."""
    prep = _Prepared(config)
    t, dens, state = _run_one(config, prep, config.seed, initial)
    return DensityTrace(t, dens, None, 1, config.digest(), config.seed, dens[None, :],
                        {"dt": prep.dt, "final_positions": state.positions})


def replica_seed(seed: int, i: int) -> int:
    return int(seed) ^ int(i)


def thread_count() -> int:
    env = os.environ.get("NLRD_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError("NLRD_THREADS must be an integer") from None
        if n < 1:
            raise ValidationError("NLRD_THREADS must be positive")
        return n
    return os.cpu_count() or 1


def run_replicas(config: SimConfig, n_rep: int, threads: int | None = None) -> DensityTrace:
    """Replica-averaged trace with standard errors of the mean."""
    if n_rep < 1:
        raise ValidationError("n_rep must be at least 1")
    prep = _Prepared(config)
    seeds = [replica_seed(config.seed, i) for i in range(n_rep)]
    threads = thread_count() if threads is None else threads
    if threads > 1 and n_rep > 1:
        with ThreadPoolExecutor(max_workers=min(threads, n_rep)) as ex:
            results = list(ex.map(lambda s: _run_one(config, prep, s), seeds))
    else:
        results = [_run_one(config, prep, s) for s in seeds]
    t = results[0][0]
    per = np.array([r[1] for r in results])
    mean = per.mean(axis=0)
    err = per.std(axis=0, ddof=1) / math.sqrt(n_rep) if n_rep > 1 else np.zeros_like(mean)
    return DensityTrace(t, mean, err, n_rep, config.digest(), config.seed, per,
                        {"dt": prep.dt, "final_positions": results[0][2].positions})


# ---------------------------------------------------------------------------
# analysis


def _ols_slope(x: np.ndarray, y: np.ndarray):
    xm = x.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - y.mean())) / sxx
    return slope, y.mean() - slope * xm, sxx


def fit_decay_exponent(trace: DensityTrace, t_lo: float, t_hi: float) -> dict:
    """Least-squares slope of log density against log t over ``[t_lo, t_hi]``.

    With several replicas the standard error is a jackknife over replicas,
    otherwise the ordinary regression standard error.
    """
    mask = trace.window(t_lo, t_hi) & (trace.times > 0)
    if mask.sum() < 8:
        raise InsufficientDataError(f"need at least 8 samples in [{t_lo}, {t_hi}], got {int(mask.sum())}")
    x = np.log(trace.times[mask])
    dens = trace.densities[mask]
    if np.any(dens <= 0):
        raise InsufficientDataError("densities must be positive inside the fit window")
    y = np.log(dens)
    slope, icpt, sxx = _ols_slope(x, y)
    per = trace.per_replica
    if per is not None and per.shape[0] >= 2:
        n = per.shape[0]
        sub = per[:, mask]
        total = sub.sum(axis=0)
        jk = np.empty(n)
        for i in range(n):
            rest = (total - sub[i]) / (n - 1)
            if np.any(rest <= 0):
                raise InsufficientDataError("a jackknife subsample has zero density in the window")
            jk[i] = _ols_slope(x, np.log(rest))[0]
        stderr = math.sqrt((n - 1) / n * np.sum((jk - jk.mean()) ** 2))
    else:
        resid = y - (icpt + slope * x)
        dof = x.size - 2
        stderr = math.sqrt(np.sum(resid**2) / dof / sxx) if dof > 0 else math.inf
    return {"slope": float(slope), "stderr": float(stderr), "n_points": int(mask.sum())}


# ---------------------------------------------------------------------------
# snapshots


def write_snapshot(path, positions: np.ndarray) -> None:
    """Binary snapshot: magic ``NLRD``, u32 dim, u64 count, little-endian f64 coordinates."""
    pos = np.ascontiguousarray(positions, dtype="<f8")
    if pos.ndim != 2:
        raise ValidationError("positions must be a 2-d array")
    header = SNAPSHOT_MAGIC + struct.pack("<IQ", pos.shape[1], pos.shape[0])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pos.tobytes())


def read_snapshot(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != SNAPSHOT_MAGIC:
            raise ValidationError("not an NLRD snapshot")
        dim, count = struct.unpack("<IQ", head[4:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != dim * count:
        raise ValidationError("snapshot payload size does not match its header")
    return data.reshape(count, dim).astype(float)
