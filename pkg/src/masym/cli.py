"""Command line entry point: one JSON config drives one reproducible run.

Every command reads a config file, writes its artifacts into the output
directory and finishes with a manifest listing each file with a sha256
content hash.  Outputs contain no timestamps or machine state, so a
rerun with the same config and seed reproduces them byte for byte.

Exit codes: 0 success, 1 failed certificate, 2 config validation error,
3 solver divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .domains import GeometryError, critical_planes, domain_from_json, domain_to_json
from .expressions import parse as parse_expr
from .gridsolve import (DivergenceError, FdParams, GridSolution, StencilGrid,
                        solve_system_fd, write_solution_binary, write_solution_csv)
from .movingplane import build_frame, lambda_sweep, linearize, verify_elliptic_inequality
from .radial import NoSolution, SolverDivergence, solve_coupled_radial
from .rhs import ConfigurationError, RhsSystem, check_hypotheses, power_coupled_system

COMMANDS = ("solve-radial", "solve-grid", "certify", "hypotheses",
            "sweep-trichotomy", "linearize")

_ALLOWED_KEYS = {
    "solve-radial": {"command", "alpha", "beta", "n", "R", "tol", "grid_size", "seed"},
    "solve-grid": {"command", "domain", "system", "cs", "params", "seed"},
    "certify": {"command", "domain", "system", "cs", "params", "nu", "n_lambdas",
                "fixture", "seed"},
    "hypotheses": {"command", "system", "box", "samples", "which", "seed"},
    "sweep-trichotomy": {"command", "n", "pairs", "R", "tol", "grid_size", "seed"},
    "linearize": {"command", "domain", "system", "cs", "params", "nu", "lambda", "seed"},
}


class ConfigError(ValueError):
    """Config file failed validation; message carries file and line."""


def _key_line(path, key):
    """Best-effort line number of a key's first occurrence in the file."""
    try:
        with open(path) as fh:
            for ln, line in enumerate(fh, start=1):
                if f'"{key}"' in line:
                    return ln
    except OSError:
        pass
    return 0


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"{path}: cannot read config: {err}")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}: invalid JSON: {err.msg}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    cmd = cfg.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"{path}:{_key_line(path, 'command')}: "
                          f"command must be one of {', '.join(COMMANDS)}")
    for key in cfg:
        if key not in _ALLOWED_KEYS[cmd]:
            raise ConfigError(f"{path}:{_key_line(path, key)}: "
                              f"unknown key {key!r} for command {cmd!r}")
    for key in ("alpha", "beta", "R", "tol"):
        if key in cfg and not (isinstance(cfg[key], (int, float)) and cfg[key] > 0):
            raise ConfigError(f"{path}:{_key_line(path, key)}: {key} must be positive")
    return cfg


def _system_from_config(obj):
    if isinstance(obj, dict) and "alpha" in obj:
        return power_coupled_system(float(obj["alpha"]), float(obj["beta"]))
    if isinstance(obj, dict):
        return RhsSystem.from_json(obj)
    if isinstance(obj, list):
        return RhsSystem(components=tuple(parse_expr(c) if isinstance(c, str) else c
                                          for c in obj), n=2)
    raise ConfigError(f"cannot interpret system description {obj!r}")


def _json_dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


class Emitter:
    """Collects artifacts in the output directory and writes the manifest."""

    def __init__(self, out_dir, quiet):
        self.out = out_dir
        self.quiet = quiet
        self.files = []
        os.makedirs(out_dir, exist_ok=True)
        self.lock = os.path.join(out_dir, ".lock")
        if os.path.exists(self.lock):
            raise ConfigError(f"output directory {out_dir} is locked by another run")
        with open(self.lock, "w") as fh:
            fh.write("locked\n")

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def say(self, msg):
        if not self.quiet:
            print(msg)

    def finish(self):
        manifest = {"artifacts": {}}
        for name in self.files:
            with open(os.path.join(self.out, name), "rb") as fh:
                manifest["artifacts"][name] = hashlib.sha256(fh.read()).hexdigest()
        _json_dump(manifest, os.path.join(self.out, "manifest.json"))
        os.remove(self.lock)
        self.say(f"wrote {len(self.files)} artifacts + manifest to {self.out}")

    def abort(self):
        if os.path.exists(self.lock):
            os.remove(self.lock)


def _profile_csv(emit, name, profiles):
    path = emit.path(name)
    header = "r," + ",".join(f"u{i+1},du{i+1}" for i in range(len(profiles)))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        cols = [profiles[0].r]
        for p in profiles:
            cols += [p.u, p.du]
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def cmd_solve_radial(cfg, emit, seed):
    alpha, beta = float(cfg["alpha"]), float(cfg["beta"])
    n = int(cfg.get("n", 2))
    res = solve_coupled_radial(alpha, beta, n, R=float(cfg.get("R", 1.0)),
                               tol=float(cfg.get("tol", 1e-9)),
                               grid_size=int(cfg.get("grid_size", 2048)))
    if isinstance(res, NoSolution):
        _json_dump({"outcome": "no-solution", "reason": res.reason,
                    "drift_sign": res.drift_sign,
                    "scaling_residual": res.scaling_residual},
                   emit.path("summary.json"))
        emit.say(f"no radial solution: {res.reason}")
        return 0
    u1, u2 = res
    _profile_csv(emit, "profile.csv", [u1, u2])
    _json_dump({"outcome": "solution", "alpha": alpha, "beta": beta, "n": n,
                "u1_center": float(u1.u[0]), "u2_center": float(u2.u[0]),
                "R": u1.R}, emit.path("summary.json"))
    emit.say(f"radial solution: u1(0) = {u1.u[0]:.9f}, u2(0) = {u2.u[0]:.9f}")
    return 0


def _grid_solution(cfg):
    domain = domain_from_json(cfg["domain"])
    system = _system_from_config(cfg["system"])
    cs = tuple(float(c) for c in cfg.get("cs", (0.0,) * system.m))
    params = FdParams.from_json(cfg.get("params", {}))
    sol = solve_system_fd(domain, system, cs, params)
    return domain, system, sol


def cmd_solve_grid(cfg, emit, seed):
    domain, system, sol = _grid_solution(cfg)
    write_solution_csv(sol, emit.path("solution.csv"))
    write_solution_binary(sol, emit.path("solution.bin"))
    _json_dump({"domain": domain_to_json(domain), "system": system.to_json(),
                "h": sol.grid.h, "n_nodes": sol.grid.n_nodes,
                "min": [float(np.min(f)) for f in sol.fields],
                "convex": list(sol.convex)}, emit.path("summary.json"))
    emit.say(f"grid solution on {sol.grid.n_nodes} nodes, "
             f"min values {[round(float(np.min(f)), 6) for f in sol.fields]}")
    return 0


def _quadratic_fixture(cfg):
    """Exact paraboloid field on the unit disk: u = |x|^2 - 1, det D^2 u = 4."""
    domain = domain_from_json(cfg.get("domain", {"shape": "ball",
                                                "center": [0.0, 0.0], "radius": 1.0}))
    params = FdParams.from_json(cfg.get("params", {}))
    grid = StencilGrid(domain, params.h, params.stencil_width)
    u = np.sum((grid.node_xy - np.asarray(domain.center)) ** 2, axis=1) \
        - domain.radius ** 2
    sol = GridSolution(grid=grid, fields=[u], cs=(0.0,))
    sol.convex = sol.convexity_audit()
    system = RhsSystem(components=(parse_expr("4"),), n=2,
                       splits=((parse_expr("0"), parse_expr("4")),),
                       lipschitz_z=(0.0,), lipschitz_p=(0.0,))
    return domain, system, sol


def cmd_certify(cfg, emit, seed):
    if cfg.get("fixture") == "quadratic":
        domain, system, sol = _quadratic_fixture(cfg)
    else:
        domain, system, sol = _grid_solution(cfg)
    nu = cfg.get("nu", [1.0, 0.0])
    planes = critical_planes(domain, nu)
    report = lambda_sweep(sol, nu, planes, int(cfg.get("n_lambdas", 16)),
                          system=system)
    _json_dump(report.to_json(), emit.path("certificate.json"))
    emit.say(f"certificate: {'PASS' if report.passed else 'FAIL'} "
             f"({report.total_ei_violations} elliptic-inequality violations)")
    return 0 if report.passed else 1


def cmd_hypotheses(cfg, emit, seed):
    system = _system_from_config(cfg["system"])
    report = check_hypotheses(system, cfg["box"],
                              samples=int(cfg.get("samples", 1024)),
                              which=cfg.get("which"), seed=seed)
    _json_dump(report.to_json(), emit.path("hypotheses.json"))
    n_fail = sum(1 for s in report.statuses.values() if s == "fail")
    emit.say(f"hypotheses: {n_fail} failed, "
             f"{sum(1 for s in report.statuses.values() if s == 'pass')} passed")
    return 0


def cmd_sweep_trichotomy(cfg, emit, seed):
    n = int(cfg.get("n", 2))
    pairs = cfg.get("pairs", [[1, 1], [1, 2], [2, 2], [3, 3]])
    rows = []
    for alpha, beta in pairs:
        res = solve_coupled_radial(float(alpha), float(beta), n,
                                   R=float(cfg.get("R", 1.0)),
                                   tol=float(cfg.get("tol", 1e-9)),
                                   grid_size=int(cfg.get("grid_size", 2048)))
        if isinstance(res, NoSolution):
            rows.append({"alpha": alpha, "beta": beta, "product": alpha * beta,
                         "outcome": "no-solution", "reason": res.reason})
        else:
            rows.append({"alpha": alpha, "beta": beta, "product": alpha * beta,
                         "outcome": "solution",
                         "u1_center": float(res[0].u[0]),
                         "u2_center": float(res[1].u[0])})
    _json_dump({"n": n, "threshold": n * n, "rows": rows}, emit.path("trichotomy.json"))
    path = emit.path("trichotomy.csv")
    with open(path, "w") as fh:
        fh.write("alpha,beta,product,outcome\n")
        for row in rows:
            fh.write(f"{row['alpha']},{row['beta']},{row['product']},{row['outcome']}\n")
    for row in rows:
        emit.say(f"  a={row['alpha']} b={row['beta']}: {row['outcome']}")
    return 0


def cmd_linearize(cfg, emit, seed):
    domain, system, sol = _grid_solution(cfg)
    nu = cfg.get("nu", [1.0, 0.0])
    frame = build_frame(sol, nu, float(cfg["lambda"]))
    lin = linearize(frame, system)
    ei = verify_elliptic_inequality(lin, frame)
    _json_dump({"lambda": frame.lam, "n_nodes": int(len(frame.node_idx)),
                "quad_order": lin.quad_order, "flagged_nonpd": list(lin.n_flagged),
                "elliptic_inequality": ei}, emit.path("linearization.json"))
    path = emit.path("linearization.csv")
    with open(path, "w") as fh:
        cols = ["x", "y"] + [f"U{i+1}" for i in range(frame.m)]
        fh.write(",".join(cols) + "\n")
        for k in range(len(frame.node_idx)):
            vals = [frame.xy[k, 0], frame.xy[k, 1]] + [frame.U[i, k]
                                                       for i in range(frame.m)]
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")
    emit.say(f"linearized {len(frame.node_idx)} cap nodes, "
             f"{ei['total_violations']} violations")
    return 0


_RUNNERS = {
    "solve-radial": cmd_solve_radial,
    "solve-grid": cmd_solve_grid,
    "certify": cmd_certify,
    "hypotheses": cmd_hypotheses,
    "sweep-trichotomy": cmd_sweep_trichotomy,
    "linearize": cmd_linearize,
}


def main(argv=None):
    ap = argparse.ArgumentParser(prog="masym",
                                 description="determinant-equation solver runs")
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="RNG seed")
    ap.add_argument("--quiet", action="store_true", help="suppress progress output")
    ap.add_argument("--version", action="version", version=__version__)
    args = ap.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    seed = int(cfg.get("seed", args.seed))

    try:
        emit = Emitter(args.out, args.quiet)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        status = _RUNNERS[cfg["command"]](cfg, emit, seed)
        emit.finish()
        return status
    except (SolverDivergence, DivergenceError) as err:
        report = os.path.join(args.out, "divergence.json")
        _json_dump({"error": str(err),
                    "history": [list(hh) if isinstance(hh, (list, tuple)) else hh
                                for hh in getattr(err, "history", [])]}, report)
        emit.abort()
        print(f"solver divergence: {err} (report: {report})", file=sys.stderr)
        return 3
    except (ConfigError, ConfigurationError, GeometryError, KeyError) as err:
        emit.abort()
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
