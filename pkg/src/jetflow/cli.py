"""Command-line interface: shoot, flow, match and check runs from JSON configs.

Config schema (top-level keys, no others allowed):
    dim, order, kernel{family, sigma}, integrator{dt, t_final, scheme},
    particles[{q, g, s, pi_q, pi_g, pi_s}], grid{min, max, shape},
    match{targets[{y, g, s}], lambda, weights{g, s},
          optimizer{max_iters, grad_tolerance, fd_step}}

All matrices are row-major nested arrays. Emitted numbers carry 17
significant digits, so outputs are byte-reproducible and round-trip
exactly. Exit codes: 0 ok, 2 validation failure, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .conservation import audit
from .dynamics import flow_points, integrate
from .errors import (
    ConfigError,
    DivergenceError,
    InvalidInputError,
    JetflowError,
    SingularJetError,
    UnsupportedOrderError,
)
from .kernels import Kernel
from .matching import RegistrationProblem, solve
from .phase import ParticleState, SystemState

TOP_KEYS = {"dim", "order", "kernel", "integrator", "particles", "grid", "match"}
PARTICLE_KEYS = {"q", "g", "s", "pi_q", "pi_g", "pi_s"}


# ---------------------------------------------------------------------------
# deterministic JSON emission (17 significant digits)

def _emit(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            raise ValueError("refusing to emit a non-finite number")
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        items = list(obj)
        if not items:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in items):
            return "[" + ", ".join(_emit(v) for v in items) + "]"
        inner = ",\n".join(pad + "  " + _emit(v, indent + 1) for v in items)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f"{pad}  {json.dumps(str(k))}: {_emit(v, indent + 1)}" for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        fh.write(_emit(obj))
        fh.write("\n")


# ---------------------------------------------------------------------------
# config parsing

def _require(cfg: dict, key: str, field: str):
    if key not in cfg:
        raise ConfigError("missing required key", field=f"{field}.{key}" if field else key)
    return cfg[key]


def _number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", field=field)
    return float(value)


def _int(value, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("expected an integer", field=field)
    return value


def _array(value, field: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError("expected a (nested) numeric array", field=field) from None
    return arr


def _check_keys(d: dict, allowed: set, field: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError("expected an object", field=field)
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", field=field)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def parse_config(cfg: dict):
    """Validate a parsed config and build the initial system."""
    _check_keys(cfg, TOP_KEYS, "config")
    dim = _int(_require(cfg, "dim", ""), "dim")
    order = _int(_require(cfg, "order", ""), "order")

    kcfg = _require(cfg, "kernel", "")
    _check_keys(kcfg, {"family", "sigma"}, "kernel")
    family = kcfg.get("family", "gaussian")
    sigma = _number(_require(kcfg, "sigma", "kernel"), "kernel.sigma")

    icfg = _require(cfg, "integrator", "")
    _check_keys(icfg, {"dt", "t_final", "scheme"}, "integrator")
    dt = _number(_require(icfg, "dt", "integrator"), "integrator.dt")
    t_final = _number(_require(icfg, "t_final", "integrator"), "integrator.t_final")
    scheme = icfg.get("scheme", "rk4")

    pcfg = _require(cfg, "particles", "")
    if not isinstance(pcfg, list) or not pcfg:
        raise ConfigError("expected a non-empty array", field="particles")

    try:
        kernel = Kernel(family=family, sigma=sigma, dim=dim)
    except JetflowError as exc:
        raise ConfigError(str(exc), field="kernel") from None

    particles = []
    for i, pd in enumerate(pcfg):
        fld = f"particles[{i}]"
        _check_keys(pd, PARTICLE_KEYS, fld)
        kw = {}
        for key in PARTICLE_KEYS:
            if key in pd:
                kw[key] = _array(pd[key], f"{fld}.{key}")
        if "q" not in kw:
            raise ConfigError("missing required key", field=f"{fld}.q")
        try:
            particles.append(ParticleState(order=order, **kw))
        except JetflowError as exc:
            raise ConfigError(str(exc), field=fld) from None
    try:
        state = SystemState(kernel=kernel, particles=tuple(particles))
    except JetflowError as exc:
        raise ConfigError(str(exc), field="particles") from None

    grid = None
    if cfg.get("grid") is not None:
        gcfg = cfg["grid"]
        _check_keys(gcfg, {"min", "max", "shape"}, "grid")
        lo = _array(_require(gcfg, "min", "grid"), "grid.min")
        hi = _array(_require(gcfg, "max", "grid"), "grid.max")
        shape = _require(gcfg, "shape", "grid")
        if lo.shape != (dim,) or hi.shape != (dim,):
            raise ConfigError(f"min/max must be length-{dim} vectors", field="grid")
        if (not isinstance(shape, list) or len(shape) != dim
                or any(not isinstance(n, int) or isinstance(n, bool) or n < 1 for n in shape)):
            raise ConfigError(f"shape must be {dim} positive integers", field="grid.shape")
        if np.any(hi < lo):
            raise ConfigError("max must be >= min", field="grid")
        axes = [np.linspace(lo[i], hi[i], shape[i]) for i in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=-1)

    match = None
    if cfg.get("match") is not None:
        mcfg = cfg["match"]
        _check_keys(mcfg, {"targets", "lambda", "weights", "optimizer"}, "match")
        lam = _number(_require(mcfg, "lambda", "match"), "match.lambda")
        tcfg = _require(mcfg, "targets", "match")
        if not isinstance(tcfg, list) or len(tcfg) != len(particles):
            raise ConfigError("targets must list one entry per particle", field="match.targets")
        tq, tg, ts = [], [], []
        for i, td in enumerate(tcfg):
            fld = f"match.targets[{i}]"
            _check_keys(td, {"y", "g", "s"}, fld)
            tq.append(_array(_require(td, "y", fld), f"{fld}.y"))
            tg.append(None if td.get("g") is None else _array(td["g"], f"{fld}.g"))
            ts.append(None if td.get("s") is None else _array(td["s"], f"{fld}.s"))
        for name, lst in (("g", tg), ("s", ts)):
            got = [t is not None for t in lst]
            if any(got) and not all(got):
                raise ConfigError(f"either all or no targets may carry {name}", field="match.targets")
        wcfg = mcfg.get("weights", {})
        _check_keys(wcfg, {"g", "s"}, "match.weights")
        ocfg = mcfg.get("optimizer", {})
        _check_keys(ocfg, {"max_iters", "grad_tolerance", "fd_step"}, "match.optimizer")
        try:
            match = RegistrationProblem(
                source=state,
                targets_q=np.asarray(tq),
                targets_g=np.asarray(tg) if tg[0] is not None else None,
                targets_s=np.asarray(ts) if ts[0] is not None else None,
                lam=lam,
                w_g=_number(wcfg.get("g", 1.0), "match.weights.g"),
                w_s=_number(wcfg.get("s", 1.0), "match.weights.s"),
                max_iters=_int(ocfg.get("max_iters", 200), "match.optimizer.max_iters"),
                grad_tolerance=_number(ocfg.get("grad_tolerance", 1e-6), "match.optimizer.grad_tolerance"),
                fd_step=_number(ocfg.get("fd_step", 1e-6), "match.optimizer.fd_step"),
                dt=dt,
            )
        except JetflowError as exc:
            raise ConfigError(str(exc), field="match") from None

    return state, dt, t_final, scheme, grid, match


# ---------------------------------------------------------------------------
# output records

def particle_record(p: ParticleState) -> dict:
    rec = {"q": p.q}
    if p.g is not None:
        rec["g"] = p.g
    if p.s is not None:
        rec["s"] = p.s
    rec["pi_q"] = p.pi_q
    if p.pi_g is not None:
        rec["pi_g"] = p.pi_g
    if p.pi_s is not None:
        rec["pi_s"] = p.pi_s
    return rec


def trajectory_record(traj) -> dict:
    return {
        "times": traj.times,
        "states": [[particle_record(p) for p in st.particles] for st in traj.states],
        "series": {name: vals for name, vals in traj.series.items()},
    }


def report_record(report) -> dict:
    return {
        "invariants": {
            name: {
                "initial": entry.initial,
                "max_abs_drift": entry.max_abs_drift,
                "max_rel_drift": entry.max_rel_drift,
                "time_of_max_drift": entry.time_of_max_drift,
            }
            for name, entry in report.entries.items()
        }
    }


def write_grid_csv(path: str, dim: int, start: np.ndarray, end: np.ndarray) -> None:
    names = ["x", "y", "z"][:dim]
    header = ",".join(f"{n}0" for n in names) + "," + ",".join(f"{n}1" for n in names)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for p0, p1 in zip(start, end):
            row = [format(v, ".17g") for v in p0] + [format(v, ".17g") for v in p1]
            fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# commands

def _cmd_shoot(state, dt, t_final, scheme, grid, match, out):
    traj = integrate(state, t_final, dt, scheme)
    write_json(out, trajectory_record(traj))


def _cmd_check(state, dt, t_final, scheme, grid, match, out):
    traj = integrate(state, t_final, dt, scheme)
    write_json(out, report_record(audit(traj)))


def _cmd_flow(state, dt, t_final, scheme, grid, match, out):
    if grid is None:
        raise ConfigError("flow requires a grid block", field="grid")
    paths = flow_points(state, grid, t_final, dt)
    write_grid_csv(out, state.dim, paths[0], paths[-1])


def _cmd_match(state, dt, t_final, scheme, grid, match, out):
    if match is None:
        raise ConfigError("match requires a match block", field="match")
    result = solve(match)
    record = {
        "converged": result.converged,
        "iterations": result.iterations,
        "objective_history": result.objective_history,
        "momenta": [
            {k: v for k, v in particle_record(p).items() if k.startswith("pi_")}
            for p in result.state.particles
        ],
        "final_mismatch": [
            {
                "q": result.position_error[A],
                **({"g": result.g_error[A]} if result.g_error is not None else {}),
                **({"s": result.s_error[A]} if result.s_error is not None else {}),
            }
            for A in range(state.n_particles)
        ],
        "trajectory": trajectory_record(result.trajectory),
    }
    write_json(out, record)


COMMANDS = {"shoot": _cmd_shoot, "flow": _cmd_flow, "match": _cmd_match, "check": _cmd_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jetflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("shoot", "integrate the system and write the trajectory"),
        ("flow", "advect a passive grid and write displacements"),
        ("match", "solve the shooting registration problem"),
        ("check", "integrate and audit invariant drift"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", required=True, help="JSON config path")
        p.add_argument("-o", "--output", required=True, help="output file path")
        p.add_argument("--dt", type=float, default=None, help="override integrator.dt")
        p.add_argument("--t-final", type=float, default=None, help="override integrator.t_final")
        p.add_argument("--seed", type=int, default=None,
                       help="seed tag for generated configs (runs are deterministic)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        state, dt, t_final, scheme, grid, match = parse_config(cfg)
        if args.dt is not None:
            dt = args.dt
        if args.t_final is not None:
            t_final = args.t_final
        if match is not None and args.dt is not None:
            match = RegistrationProblem(
                source=match.source, targets_q=match.targets_q, lam=match.lam,
                targets_g=match.targets_g, targets_s=match.targets_s,
                w_g=match.w_g, w_s=match.w_s, max_iters=match.max_iters,
                grad_tolerance=match.grad_tolerance, fd_step=match.fd_step, dt=dt,
            )
        COMMANDS[args.command](state, dt, t_final, scheme, grid, match, args.output)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, InvalidInputError, SingularJetError, UnsupportedOrderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
