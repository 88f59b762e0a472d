"""End-to-end acceptance checks shared by the test suite and ``verify``.

Each check returns a :class:`CheckResult` with the measured quantities so the
caller can print or serialize them. Nothing here is used by the solvers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .errors import ResonantMode
from .evolver import Evolver, measure_phase_speed, l2_drift
from .fields import StreamFunctionField, velocity
from .geometry import EllipsoidGeometry, ThetaGrid, ZonalProfile, equator_curvature, pole_slope
from .instability import build_experiment, lower_bound, sup_distance, asymptotic_threshold
from .spectral import solve_modes, verify_perturbation
from .waves import (
    assemble_stationary,
    solve_g,
    solve_traveling,
    stationary_residual,
    unsteady_residual,
)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"[{tag}] {self.number:2d} {self.name}: {info}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3e}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


# --- independent oracles ----------------------------------------------------------


def bvp_collocation(lam: float, geom: EllipsoidGeometry, forcing, N: int = 96):
    """Chebyshev collocation for the zonal problem in ``x = sin(theta)``.

    In ``x`` the operator ``(1/w) d/dtheta[(cos/rho) d/dtheta]`` becomes
    ``(1 - x^2)/rho^2 D^2 - (2x/rho^2 + (1 - x^2) e^2 x / rho^4) D`` with
    ``rho^2 = b^2 + e^2 x^2``. The equation is collocated at all Lobatto
    points; at ``x = +-1`` it degenerates into the regularity condition.
    ``forcing`` is a function of ``x``. Returns a callable ``g(theta)``.
    """
    x = np.cos(np.pi * np.arange(N + 1) / N)
    e2 = 1.0 - geom.b ** 2
    r2 = geom.b ** 2 + e2 * x * x
    a2 = (1.0 - x * x) / r2
    a1 = -2.0 * x / r2 - (1.0 - x * x) * e2 * x / r2 ** 2
    eye = np.eye(N + 1)
    T = cheb.chebvander(x, N)
    D1 = np.column_stack([cheb.chebval(x, cheb.chebder(eye[k])) for k in range(N + 1)])
    D2 = np.column_stack([cheb.chebval(x, cheb.chebder(eye[k], 2)) for k in range(N + 1)])
    A = a2[:, None] * D2 + a1[:, None] * D1 + lam * T
    coef = np.linalg.solve(A, -forcing(x))

    def g(theta):
        return cheb.chebval(np.sin(theta), coef)

    return g


# --- the ten checks -------------------------------------------------------------


def check_sphere_spectrum(n: int = 1024, lmax: int = 8, tol: float = 1e-6,
                          max_seconds_per_mode: float = 5.0) -> CheckResult:
    geom = EllipsoidGeometry(1.0, 1.0)
    grid = ThetaGrid(n)
    worst, per_mode = 0.0, 0.0
    for m in range(lmax + 1):
        t0 = time.perf_counter()
        modes = solve_modes(geom, m, lmax, grid)
        per_mode = max(per_mode, (time.perf_counter() - t0) / len(modes))
        worst = max(worst, max(abs(md.lam - md.l * (md.l + 1)) for md in modes))
    ok = worst <= tol and per_mode <= max_seconds_per_mode
    return CheckResult(1, "sphere spectrum", ok,
                       {"max_abs_error": worst, "seconds_per_mode": per_mode})


def check_perturbation_slope(threshold: float = 1.8) -> CheckResult:
    slopes = [verify_perturbation(2, 1, -1.0), verify_perturbation(3, 2, -1.0)]
    return CheckResult(2, "first-order eigenvalue shift", min(slopes) >= threshold,
                       {"slope_21": slopes[0], "slope_32": slopes[1]})


def check_sphere_g(n: int = 2048, tol: float = 1e-6) -> CheckResult:
    geom = EllipsoidGeometry(1.0, 1.0)
    grid = ThetaGrid(n)
    g, C = solve_g(6.0, geom, grid)
    err = float(np.max(np.abs(g.values + 0.5 * grid.sin)))
    cerr = abs(C - 0.5)
    return CheckResult(3, "sphere-limit zonal profile", err <= tol and cerr <= tol,
                       {"sup_error": err, "C": C})


def _stationary(b, n, l=2, m=1, backend="spectral", degree=5):
    geom = EllipsoidGeometry(b, 1.0)
    grid = ThetaGrid(n)
    mode = solve_modes(geom, m, l, grid)[-1]
    g, C = solve_g(mode.lam, geom, grid, degree)
    return geom, grid, mode, g, C


def check_ellipsoid_stationarity(b: float = 0.9, n: int = 256, tol: float = 1e-5,
                                 fd_order: int = 6, ladder=(64, 128, 256),
                                 oracle_tol: float = 1e-6) -> CheckResult:
    geom, grid, mode, g, _ = _stationary(b, n)
    psi = assemble_stationary(mode, 1.0, None, g)
    res = stationary_residual(psi, geom)
    # refinement ladder with the finite-difference backend; the 1/w division
    # costs two orders near the poles
    ladder_res = []
    for nn in ladder:
        geo, gr, md, gg, _ = _stationary(b, nn)
        ladder_res.append(stationary_residual(assemble_stationary(md, 1.0, None, gg), geo,
                                              backend="fd", fd_order=fd_order))
    orders = [math.log2(ladder_res[k] / ladder_res[k + 1]) for k in range(len(ladder) - 1)]
    expected = fd_order - 2
    oracle = bvp_collocation(mode.lam, geom,
                             lambda x: 2.0 * geom.omega * x / np.sqrt(b * b + (1 - b * b) * x * x))
    oerr = float(np.max(np.abs(oracle(grid.nodes) - g.values)))
    ok = res <= tol and min(orders) >= expected - 0.5 and oerr <= oracle_tol
    return CheckResult(4, "ellipsoid stationarity", ok,
                       {"residual": res, "fd_residuals": ladder_res, "orders": orders,
                        "expected_order": expected, "oracle_error": oerr})


def check_boundary_smoothness(b: float = 0.9, ladder=(128, 256, 512),
                              curvature_tol: float = 1e-4, floor: float = 1e-9) -> CheckResult:
    slopes, bounds, curv = [], [], []
    for n in ladder:
        geom = EllipsoidGeometry(b, 1.0)
        grid = ThetaGrid(n)
        mode = solve_modes(geom, 1, 2, grid)[-1]
        g, _ = solve_g(mode.lam, geom, grid)
        h = grid.h
        s = max(abs(pole_slope(g.values, h, -1)), abs(pole_slope(g.values, h, +1)))
        slopes.append(s)
        bounds.append(10.0 * h * h)
        curv.append(abs(equator_curvature(g.values[: grid.equator + 1], h)))
    ok_slope = all(s <= bd for s, bd in zip(slopes, bounds))
    ok_curv = all(c <= curvature_tol for c in curv)
    # converging: non-increasing down to the rounding floor
    conv = all(curv[k + 1] <= max(curv[k], floor) for k in range(len(curv) - 1)) and \
        all(slopes[k + 1] <= max(slopes[k], floor) for k in range(len(slopes) - 1))
    return CheckResult(5, "boundary slope and equator curvature", ok_slope and ok_curv and conv,
                       {"pole_slopes": slopes, "bounds": bounds, "curvatures": curv})


def check_traveling(b: float = 0.9, c: float = 0.3, n: int = 256, tol: float = 1e-5,
                    evo_n: int = 64, mmax: int = 4, dt: float = 0.005, T: float = 1.0,
                    speed_tol: float = 0.02) -> CheckResult:
    geom = EllipsoidGeometry(b, 1.0)
    tw = solve_traveling(geom, 2, 1, c, ThetaGrid(n))
    res = [unsteady_residual(tw, t) for t in (0.0, 1.0, 2.0)]
    tw_e = solve_traveling(geom, 2, 1, c, ThetaGrid(evo_n))
    traj = Evolver(geom, tw_e.mode.y1.grid, mmax).run(tw_e.field(0.0), dt, T, save_every=10)
    speed = measure_phase_speed(traj, 1)
    rel = abs(speed - c) / abs(c)
    return CheckResult(6, "traveling construction", max(res) <= tol and rel <= speed_tol,
                       {"unsteady_residuals": res, "phase_speed": speed, "relative_error": rel})


def check_evolved_stationarity(b: float = 0.9, n: int = 64, mmax: int = 4, dt: float = 0.005,
                               T: float = 1.0, tol: float = 1e-4, inv_tol: float = 1e-6
                               ) -> CheckResult:
    geom, grid, mode, g, _ = _stationary(b, n)
    psi0 = assemble_stationary(mode, 1.0, None, g)
    traj = Evolver(geom, grid, mmax).run(psi0, dt, T, save_every=10)
    drift = max(l2_drift(s.psi, psi0, geom) for s in traj.states)
    E, Z = traj.energy, traj.enstrophy
    dE = float(np.max(np.abs(E - E[0])) / abs(E[0]))
    dZ = float(np.max(np.abs(Z - Z[0])) / abs(Z[0]))
    return CheckResult(7, "stationarity under evolution", drift <= tol and max(dE, dZ) <= inv_tol,
                       {"l2_drift": drift, "energy_drift": dE, "enstrophy_drift": dZ})


def check_instability(b: float = 0.9, c: float = 0.3, n: int = 128,
                      n_list=(1, 2, 5, 10, 100), asym_n: int = 10000,
                      asym_tol: float = 1e-6, scale_tol: float = 1e-10) -> CheckResult:
    geom = EllipsoidGeometry(b, 1.0)
    tw = solve_traveling(geom, 2, 1, c, ThetaGrid(n))
    sups, bounds = [], []
    N = asymptotic_threshold(build_experiment(tw, 1))
    ok_bound = ok_half = True
    init = []
    for k in n_list:
        exp = build_experiment(tw, k)
        s = sup_distance(exp)
        lb = lower_bound(exp)
        sups.append(s)
        bounds.append(lb)
        ok_bound &= s >= max(lb, 0.0)
        if k >= N:
            ok_half &= s >= 0.5 * (lb + exp.f_norm_sq / k)
        init.append(math.sqrt(exp.distance_sq_fields(0.0)))
    scale = max(abs(init[j] * n_list[j] / (init[0] * n_list[0]) - 1.0) for j in range(len(n_list)))
    # one-sided wave: a1 = 1, a2 = 0, so the rotating part contributes exactly 4
    one = solve_traveling(geom, 2, 1, c, ThetaGrid(n), a1=1.0, a2=0.0)
    asym = sup_distance(build_experiment(one, asym_n))
    ok = ok_bound and ok_half and abs(asym - 4.0) <= asym_tol and scale <= scale_tol
    return CheckResult(8, "instability bound", ok,
                       {"sup": sups, "lower_bound": bounds, "N": N, "asymptotic_sup": asym,
                        "initial_scaling_error": scale})


def check_uniqueness(b: float = 0.9, c: float = 0.3, n: int = 128, tol: float = 1e-5,
                     var_tol: float = 1e-10) -> CheckResult:
    geom = EllipsoidGeometry(b, 1.0)
    gA, gB = ThetaGrid(n), ThetaGrid(2 * n)
    A = solve_traveling(geom, 2, 1, c, gA, degree=5)
    B = solve_traveling(geom, 2, 1, c, gB, degree=3)
    uA, vA = velocity(A.field(0.0), geom, "spectral")
    uB, vB = velocity(B.field(0.0), geom, "fd")
    # every node of the coarse grid is every other node of the fine one
    uB, vB = uB[:, ::2], vB[:, ::2]
    dvel = float(max(np.max(np.abs(uA - uB)), np.max(np.abs(vA - vB))))
    _, pA = A.field(0.0).to_physical(16)
    _, pB = B.field(0.0).to_physical(16)
    diff = pA - pB[:, ::2]
    var = float(np.var(diff))
    return CheckResult(9, "uniqueness across discretizations", dvel <= tol and var <= var_tol,
                       {"velocity_difference": dvel, "psi_difference_variance": var})


def check_negative_controls() -> CheckResult:
    geom = EllipsoidGeometry(0.9, 1.0)
    grid = ThetaGrid(128)
    zonal = StreamFunctionField.from_zonal(ZonalProfile(grid, np.sin(grid.nodes) ** 3, odd=True), 2)
    r_zonal = stationary_residual(zonal, geom)
    sphere = EllipsoidGeometry(1.0, 1.0)
    mode = solve_modes(sphere, 1, 2, grid)[-1]
    bad = ZonalProfile(grid, -0.25 * grid.sin, odd=True, lam=mode.lam)
    r_bad = stationary_residual(assemble_stationary(mode, 1.0, None, bad), sphere)
    try:
        solve_g(2.0, sphere, grid)
        rejected = False
    except ResonantMode:
        rejected = True
    ok = r_zonal == 0.0 and r_bad >= 1e-2 and rejected
    return CheckResult(10, "negative controls", ok,
                       {"zonal_residual": r_zonal, "misscaled_residual": r_bad,
                        "l1_rejected": rejected})


CHECKS = (
    check_sphere_spectrum,
    check_perturbation_slope,
    check_sphere_g,
    check_ellipsoid_stationarity,
    check_boundary_smoothness,
    check_traveling,
    check_evolved_stationarity,
    check_instability,
    check_uniqueness,
    check_negative_controls,
)


def run_all(select=None, echo=None) -> list[CheckResult]:
    """Run every check (or the 1-based numbers in ``select``)."""
    out = []
    for k, fn in enumerate(CHECKS, 1):
        if select and k not in select:
            continue
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a crash is a failure of that criterion, not of the suite
            res = CheckResult(k, fn.__name__.removeprefix("check_").replace("_", " "), False,
                              {"error": f"{type(exc).__name__}: {exc}"})
        res.seconds = time.perf_counter() - t0
        out.append(res)
        if echo:
            echo(res.line())
    return out
