"""Command-line front end: ``ellipsoid-rh <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 solver error (including a
failed acceptance check under ``verify``).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, RHError
from .evolver import Evolver, l2_drift, measure_phase_speed
from .geometry import EllipsoidGeometry, ThetaGrid, pole_slope, write_columns
from .instability import build_experiment, default_tgrid, lower_bound, sup_distance, two_term_value
from .io import RunConfig, load_config, write_atomic, write_json, write_manifest
from .spectral import perturbation_lambda1, solve_modes
from .waves import (
    assemble_stationary,
    solve_f,
    solve_g,
    assemble_traveling,
    stationary_residual,
    unsteady_residual,
)

# flattening below which the first-order eigenvalue prediction is reported
_PRED_EPS = 0.05


def _setup(cfg: RunConfig):
    geom = EllipsoidGeometry(cfg.b, cfg.omega)
    return geom, ThetaGrid(cfg.grid_n)


def _traveling(cfg: RunConfig, c: float):
    geom, grid = _setup(cfg)
    mode = solve_modes(geom, cfg.m, cfg.l, grid, tol=cfg.tol)[-1]
    g, C = solve_g(mode.lam, geom, grid, cfg.degree)
    f = solve_f(mode.lam, geom, grid, cfg.degree)
    return assemble_traveling(mode, 1.0, None, g, f, c, geom), C


def cmd_eig(cfg: RunConfig, out: Path) -> list:
    geom, grid = _setup(cfg)
    lmax = cfg.lmax if cfg.lmax is not None else cfg.l
    modes = solve_modes(geom, cfg.m, lmax, grid, tol=cfg.tol)
    cols = {"l": np.array([md.l for md in modes]), "m": np.full(len(modes), cfg.m),
            "lambda": np.array([md.lam for md in modes])}
    eps = 1.0 - cfg.b
    if eps <= _PRED_EPS:
        cols["lambda_pred"] = np.array([md.l * (md.l + 1) + eps * perturbation_lambda1(md.l, cfg.m, -1.0)
                                        for md in modes])
    write_atomic(out / "spectrum.csv", write_columns(cols))
    efun = {"theta": grid.nodes}
    efun.update({f"y1_l{md.l}": md.y1.values for md in modes})
    write_atomic(out / "eigenfunctions.csv", write_columns(efun))
    summary = {"b": cfg.b, "m": cfg.m, "lmax": lmax,
               "lambda": [md.lam for md in modes]}
    if "lambda_pred" in cols:
        summary["lambda_pred"] = cols["lambda_pred"].tolist()
    write_json(out / "summary.json", summary)
    return ["spectrum.csv", "eigenfunctions.csv", "summary.json"]


def cmd_stationary(cfg: RunConfig, out: Path) -> list:
    tw, C = _traveling(cfg, 0.0)
    psi = assemble_stationary(tw.mode, 1.0, None, tw.g)
    g = tw.g
    write_atomic(out / "g.csv", g.to_csv("g", "dg"))
    write_atomic(out / "field.csv", psi.to_csv())
    res = stationary_residual(psi, tw.geom, cfg.backend, cfg.fd_order)
    h = g.grid.h
    bd = max(abs(pole_slope(g.values, h, -1)), abs(pole_slope(g.values, h, +1)))
    write_json(out / "summary.json", {"b": cfg.b, "omega": cfg.omega, "l": cfg.l, "m": cfg.m,
                                      "lambda": tw.lam, "C": C, "residual_sup": res,
                                      "boundary_derivative": bd})
    return ["g.csv", "field.csv", "summary.json"]


def cmd_traveling(cfg: RunConfig, out: Path) -> list:
    tw, C = _traveling(cfg, cfg.c)
    write_atomic(out / "g.csv", tw.g.to_csv("g", "dg"))
    write_atomic(out / "f.csv", tw.f.to_csv("f", "df"))
    write_atomic(out / "field.csv", tw.field(0.0).to_csv())
    still = assemble_stationary(tw.mode, 1.0, None, tw.g)
    rs = stationary_residual(still, tw.geom, cfg.backend, cfg.fd_order)
    ru = max(unsteady_residual(tw, t, cfg.backend, cfg.fd_order) for t in (0.0, 1.0, 2.0))
    write_json(out / "summary.json", {"b": cfg.b, "omega": cfg.omega, "l": cfg.l, "m": cfg.m,
                                      "c": cfg.c, "lambda": tw.lam, "C": C,
                                      "residual_stationary": rs, "residual_unsteady": ru})
    return ["g.csv", "f.csv", "field.csv", "summary.json"]


def cmd_evolve(cfg: RunConfig, out: Path) -> tuple:
    c = {"stationary": 0.0, "traveling": cfg.c, "zonal": 0.0}[cfg.initial]
    tw, _ = _traveling(cfg, c)
    if cfg.initial == "zonal":
        tw.a1 = tw.a2 = 0.0
    psi0 = tw.field(0.0)
    mmax = cfg.mmax if cfg.mmax is not None else max(4 * psi0.mmax, 2)
    ev = Evolver(tw.geom, psi0.grid, mmax, cfg.backend, cfg.fd_order)
    traj = ev.run(psi0, cfg.dt, cfg.T, cfg.save_every)
    files = []
    for k, s in enumerate(traj.states):
        name = f"states/psi_{k:04d}.csv"
        write_atomic(out / name, s.psi.to_csv())
        files.append(name)
    drift = max(l2_drift(s.psi, tw.field(s.t), tw.geom) for s in traj.states)
    m = abs(cfg.m)
    try:
        speed = measure_phase_speed(traj, m) if m and cfg.initial != "zonal" else None
    except RHError:
        speed = None
    E, Z = traj.energy, traj.enstrophy
    summary = {"drift": drift, "phase_speed_estimate": speed,
               "energy_drift": float(np.max(np.abs(E - E[0])) / max(abs(E[0]), 1e-300)),
               "enstrophy_drift": float(np.max(np.abs(Z - Z[0])) / max(abs(Z[0]), 1e-300))}
    write_json(out / "summary.json", summary)
    extra = {"times": traj.times.tolist(), "energy": E.tolist(), "enstrophy": Z.tolist(),
             "phase_speed_estimate": speed}
    return files + ["summary.json"], extra


def cmd_instability(cfg: RunConfig, out: Path) -> list:
    tw, _ = _traveling(cfg, cfg.c)
    rows, files = [], []
    for n in cfg.n_list:
        exp = build_experiment(tw, int(n))
        t = default_tgrid(exp)
        d2 = np.array([exp.distance_sq_fields(s) for s in t])
        name = f"distance_n{int(n)}.csv"
        write_atomic(out / name, write_columns({"t": t, "distance_sq": d2}))
        files.append(name)
        rows.append({"n": int(n), "c": exp.c, "c_n": exp.c_n,
                     "initial_distance": math.sqrt(exp.distance_sq_fields(0.0)),
                     "sup_distance_sq": sup_distance(exp, t), "lower_bound": lower_bound(exp),
                     "two_term_value": two_term_value(exp), "t_star": exp.t_star})
    write_json(out / "summary.json", {"experiments": rows})
    return files + ["summary.json"]


def cmd_verify(cfg: RunConfig, out: Path) -> tuple:
    from .acceptance import run_all

    results = run_all(echo=print)
    payload = [{"criterion": r.number, "name": r.name, "passed": r.passed,
                "seconds": r.seconds, "details": r.details} for r in results]
    write_json(out / "acceptance.json", payload)
    return ["acceptance.json"], {"all_passed": all(r.passed for r in results)}


COMMANDS = {
    "eig": cmd_eig,
    "stationary": cmd_stationary,
    "traveling": cmd_traveling,
    "evolve": cmd_evolve,
    "instability": cmd_instability,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ellipsoid-rh",
                                description="Rossby-Haurwitz solutions on a rotating ellipsoid.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value file or a previous manifest.json")
        s.add_argument("--out", default=f"out/{name}", help="output directory")
        s.add_argument("--b", type=float)
        s.add_argument("--omega", type=float)
        s.add_argument("--l", type=int)
        s.add_argument("--m", type=int)
        s.add_argument("--c", type=float)
        s.add_argument("--grid-n", dest="grid_n", type=int)
        s.add_argument("--tol", type=float)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    overrides = {k: getattr(args, k) for k in ("b", "omega", "l", "m", "c", "grid_n", "tol")}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        result = COMMANDS[args.command](cfg, out)
    except RHError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    files, extra = result if isinstance(result, tuple) else (result, None)
    write_manifest(out, args.command, cfg, files, extra)
    if args.command == "verify" and not extra["all_passed"]:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
