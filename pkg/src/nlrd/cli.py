"""Command-line interface: ``nlrd <command> [--config FILE] [--set KEY=VALUE] [--out PATH]``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure (divergence,
tolerance, capacity).  Errors are reported as one JSON object on stderr.
Tabular results are CSV whose leading ``#`` lines carry the SHA-256 of
the resolved configuration and the configuration itself.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from . import config as cfgmod
from . import loops, meanfield, propagators, rgflow, simulator, verify
from .errors import NLRDError, NumericalError, ValidationError
from .io import atomic_write_json, atomic_write_text, canonical_json, config_digest, json_default
from .kernels import Kernel, Profile

COMMANDS = ("kernels", "meanfield", "propagator", "loops", "rg", "simulate", "verify")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _parse_set(items) -> dict:
    """``a.b=1`` pairs into a nested dict; values are parsed as JSON when possible."""
    out: dict = {}
    for item in items or ():
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValidationError(f"--set path {key!r} conflicts with a scalar")
        node[parts[-1]] = val
    return out


def _deep_update(base: dict, extra: dict) -> dict:
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v
    return base


def _csv(header, rows, cfg: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# config_sha256={config_digest(cfg)}\n")
    buf.write(f"# config={canonical_json(cfg)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_kernels(cfg: dict) -> str:
    kb = cfg["kernel"]
    K = Kernel.from_config(kb)
    if cfg["mode"] == "table":
        rows = []
        if K.profile is not Profile.LOCAL:
            for r in cfgmod.grid(cfg["r"], "r"):
                rows.append(("real", r, K.real_space(r)))
        for k in cfgmod.grid(cfg["k"], "k"):
            rows.append(("momentum", k, K.momentum_space(k)))
        return _csv(("space", "x", "value"), rows, cfg)
    if cfg["mode"] == "ft-check":
        if K.profile is Profile.LOCAL or K.dim not in (1.0, 3.0):
            raise ValidationError("ft-check needs a non-local kernel in d = 1 or 3")
        rows = []
        for k in cfgmod.grid(cfg["k"], "k"):
            if k <= 0:
                continue
            exact = K.momentum_space(k)
            num = verify.numeric_fourier(K, k)
            rows.append((k, exact, num, abs(num - exact) / abs(exact) if exact else abs(num)))
        return _csv(("k", "closed_form", "numeric", "rel_error"), rows, cfg)
    raise ValidationError("kernels.mode must be 'table' or 'ft-check'")


def cmd_meanfield(cfg: dict) -> str:
    params = cfgmod.model_from(cfg["params"])
    t = cfgmod.grid(cfg["t"], "t")
    if cfg["model"] == "model1":
        dens = meanfield.density_model1(params.n0, params.R, t)
        return _csv(("t", "density"), zip(t, np.atleast_1d(dens)), cfg)
    if cfg["model"] == "model2":
        tr = meanfield.density_model2_ode(params, t, flipped_annihilation_sign=bool(cfg["flipped_annihilation_sign"]))
        return _csv(("t", "density"), zip(tr.times, tr.densities), cfg)
    raise ValidationError("meanfield.model must be 'model1' or 'model2'")


def cmd_propagator(cfg: dict) -> str:
    d = float(cfg["dim"])
    Rk = cfgmod.kernel_from(cfg["annihilation"], d, "annihilation")
    Qk = cfgmod.kernel_from(cfg["branching"], d, "branching")
    D, M = float(cfg["D"]), float(cfg["M_over_D"])
    kind = cfg["kind"]
    ks = cfgmod.grid(cfg["k"], "k")
    ts = cfgmod.grid(cfg["t"], "t")
    pp = propagators.PropagatorParams(D, M, Qk, Rk, float(cfg["g"]), float(cfg["X"]))
    rows = []
    for k in ks:
        for t in ts:
            if kind == "bare":
                v = propagators.bare_propagator(k, t, D, M)
            elif kind == "dressed":
                # the branching rate is configured as Q/D; the dressed form takes the physical rate
                v = propagators.dressed_propagator(k, t, D, M, Qk.with_rate(Qk.rate * D))
            elif kind == "response":
                v = propagators.response_functional(k, float(cfg["t1"]), t, Rk, float(cfg["n0"]), D)
            elif kind == "phibar_phi":
                v = propagators.phibar_phi(k, t, pp)
            elif kind == "phi_phi":
                v = propagators.phi_phi(k, t, pp)
            else:
                raise ValidationError("propagator.kind must be one of bare, dressed, response, phibar_phi, phi_phi")
            rows.append((k, t, v))
    return _csv(("k", "t", "value"), rows, cfg)


def cmd_loops(cfg: dict) -> str:
    K = Kernel.from_config(cfg["kernel"])
    D = float(cfg["D"])
    integral, method = cfg["integral"], cfg["method"]
    if method not in ("auto", "quadrature", "closed"):
        raise ValidationError("loops.method must be auto, quadrature or closed")
    rows = []
    for t in cfgmod.grid(cfg["t"], "t"):
        if integral == "i1":
            res = loops.LoopResult(loops.i1(K.rate, t), "closed_form", 0.0)
        elif integral == "i2":
            if method == "quadrature":
                res = loops.i2_quadrature(K, D, K.dim, t)
            elif method == "closed":
                if K.profile is Profile.SPHERICAL:
                    raise ValidationError("no closed form exists for the spherical kernel")
                res = loops.i2(K, D, t)
            else:
                res = loops.i2(K, D, t)
        elif integral == "effective_coupling":
            val = loops.effective_coupling(K, D, K.dim, t)
            res = loops.LoopResult(val, "quadrature" if K.profile is Profile.SPHERICAL else "closed_form", 0.0)
        elif integral == "x1":
            res = loops.x1_loop(t, K, float(cfg["n0"]), D)
        else:
            raise ValidationError("loops.integral must be i1, i2, effective_coupling or x1")
        lam = "" if K.profile is Profile.LOCAL else K.precision
        rows.append((integral, K.profile.value, K.dim, lam, D, t, res.value, res.est_error, res.method))
    header = ("integral", "profile", "d", "lambda", "D", "t", "value", "est_error", "method")
    return _csv(header, rows, cfg)


def cmd_rg(cfg: dict) -> str:
    gammas = cfgmod.grid(cfg["gamma"], "gamma")
    eps = float(cfg["eps"])
    if cfg["model"] == "model1":
        tab = rgflow.flow_table_model1(float(cfg["g_r"]), eps, gammas)
        return _csv(("gamma", "g_r"), tab, cfg)
    if cfg["model"] == "model2":
        tab = rgflow.flow_table_model2(float(cfg["u"]), float(cfg["tau"]), float(cfg["X"]), float(cfg["b"]),
                                       eps, gammas)
        return _csv(("gamma", "u", "tau", "X", "b"), tab, cfg)
    raise ValidationError("rg.model must be 'model1' or 'model2'")


def _sim_config(cfg: dict) -> simulator.SimConfig:
    params = cfgmod.model_from(cfg["params"])
    rec = cfgmod.grid(cfg["record"], "record")
    rec = np.unique(np.concatenate([[0.0], rec[rec <= float(cfg["t_max"])]]))
    try:
        seed = int(cfg["seed"])
        replicas = int(cfg["replicas"])
    except (TypeError, ValueError):
        raise ValidationError("seed and replicas must be integers") from None
    if replicas < 1:
        raise ValidationError("replicas must be at least 1")
    return simulator.SimConfig(params, box=float(cfg["box"]), t_max=float(cfg["t_max"]),
                               dt=None if cfg["dt"] is None else float(cfg["dt"]),
                               record_times=tuple(rec), seed=seed, pair_tol=float(cfg["pair_tol"]),
                               max_particles=int(cfg["max_particles"]),
                               local_lambda=float(cfg["local_lambda"]))


def cmd_simulate(cfg: dict) -> str:
    sc = _sim_config(cfg)
    tr = simulator.run_replicas(sc, int(cfg["replicas"]))
    if cfg["snapshot"]:
        simulator.write_snapshot(cfg["snapshot"], tr.meta["final_positions"])
    err = tr.stderr if tr.stderr is not None else np.zeros_like(tr.times)
    rows = [(t, x, e, str(tr.replicas)) for t, x, e in zip(tr.times, tr.densities, err)]
    return _csv(("t", "density", "stderr", "n_replicas"), rows, cfg)


def cmd_verify(cfg: dict) -> dict:
    report = verify.verify_suite(cfg["level"])
    report["config_sha256"] = config_digest(cfg)
    report["config"] = cfg
    return report


HANDLERS = {"kernels": cmd_kernels, "meanfield": cmd_meanfield, "propagator": cmd_propagator,
            "loops": cmd_loops, "rg": cmd_rg, "simulate": cmd_simulate, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlrd", description="Non-local reaction-diffusion toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name in ("propagator", "rg"):
            p.add_argument("action", nargs="?", default="eval" if name == "propagator" else "flow",
                           choices=["eval"] if name == "propagator" else ["flow"])
        if name == "kernels":
            p.add_argument("--mode", choices=["table", "ft-check"])
        if name == "verify":
            p.add_argument("--level", choices=["fast", "full"])
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
        p.add_argument("--out", help="output path (default: stdout)")
    return parser


def _fail(exc: Exception, code: int) -> int:
    kind = getattr(exc, "kind", type(exc).__name__)
    json.dump({"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}, "exit_code": code},
              sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        given = cfgmod.load(args.config) if args.config else {}
        _deep_update(given, _parse_set(args.set))
        if getattr(args, "mode", None):
            given["mode"] = args.mode
        if getattr(args, "level", None):
            given["level"] = args.level
        cfg = cfgmod.resolve(args.command, given)
        result = HANDLERS[args.command](cfg)
        if args.out:
            if isinstance(result, dict):
                atomic_write_json(args.out, result)
            else:
                atomic_write_text(args.out, result)
                atomic_write_json(f"{args.out}.config.json", cfg)
        else:
            sys.stdout.write(json.dumps(result, indent=2, default=json_default) + "\n" if isinstance(result, dict) else result)
        return 0
    except ValidationError as exc:
        return _fail(exc, 1)
    except (NumericalError, ArithmeticError) as exc:
        return _fail(exc, 2)
    except NLRDError as exc:
        return _fail(exc, 1)
    except (KeyError, TypeError, ValueError) as exc:
        return _fail(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
