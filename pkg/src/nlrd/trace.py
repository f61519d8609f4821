"""Density time series shared by the ODE integrators and the simulator."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class DensityTrace:
    times: np.ndarray
    densities: np.ndarray
    stderr: np.ndarray | None = None
    replicas: int = 1
    config_hash: str = ""
    seed: int | None = None
    per_replica: np.ndarray | None = None  # shape (replicas, len(times)) when kept
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.densities = np.asarray(self.densities, dtype=float)
        if self.times.shape != self.densities.shape:
            raise ValidationError("times and densities must have equal length")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.times.shape:
                raise ValidationError("stderr must match times")
        if np.any(self.densities < 0):
            raise ValidationError("densities must be non-negative")

    def __len__(self):
        return self.times.size

    def to_csv(self, with_errors: bool | None = None) -> str:
        """CSV text; ``t,density`` or ``t,density,stderr,n_replicas``."""
        if with_errors is None:
            with_errors = self.stderr is not None
        buf = io.StringIO()
        if self.config_hash:
            buf.write(f"# config_sha256={self.config_hash}\n")
        if with_errors:
            err = self.stderr if self.stderr is not None else np.zeros_like(self.times)
            buf.write("t,density,stderr,n_replicas\n")
            for t, x, e in zip(self.times, self.densities, err):
                buf.write(f"{float(t)!r},{float(x)!r},{float(e)!r},{self.replicas}\n")
        else:
            buf.write("t,density\n")
            for t, x in zip(self.times, self.densities):
                buf.write(f"{float(t)!r},{float(x)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DensityTrace":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        header = lines[0].split(",")
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(header))
        digest = ""
        for ln in text.splitlines():
            if ln.startswith("# config_sha256="):
                digest = ln.split("=", 1)[1]
        if header[:2] != ["t", "density"]:
            raise ValidationError(f"unexpected trace header {header}")
        if len(header) == 4:
            reps = int(rows[0, 3]) if len(rows) else 1
            return cls(rows[:, 0], rows[:, 1], rows[:, 2], reps, digest)
        return cls(rows[:, 0], rows[:, 1], None, 1, digest)

    def window(self, t_lo: float, t_hi: float) -> np.ndarray:
        return (self.times >= t_lo * (1 - 1e-12)) & (self.times <= t_hi * (1 + 1e-12))


def log_spaced_times(t_min: float, t_max: float, per_decade: int = 10) -> np.ndarray:
    """Log-spaced sample times from ``t_min`` to ``t_max`` inclusive."""
    if not 0 < t_min < t_max:
        raise ValidationError("need 0 < t_min < t_max")
    n = max(2, int(math.ceil(per_decade * math.log10(t_max / t_min))) + 1)
    return np.geomspace(t_min, t_max, n)
