import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import legendre as leg

from ellipsoid_rh.errors import AdmissibilityFailure, NonvanishingAtOrigin, ResolventVanishing
from ellipsoid_rh.geometry import (
    EllipsoidGeometry,
    ThetaGrid,
    ZonalProfile,
    area_weight,
    coriolis,
    equator_curvature,
    pole_slope,
    rho,
    theta_derivative,
    zone_area,
)
from ellipsoid_rh.vie import (
    _forcing_data,
    build_kernel,
    kernel_admissibility,
    odd_extend,
    resolvent,
    solve_zonal,
)
from ellipsoid_rh.waves import solve_g

from conftest import C_G_B09, G_B09_AT_M07, LAM21_B09
from oracles import collocation_zonal, resolvent_column


def _cor(geom):
    return lambda t: coriolis(t, geom)


def ode_residual(prof, lam, geom, h):
    """Interior sup of -lam g - (1/w)[(cos/rho) g']' - h using the stored derivative."""
    grid = prof.grid
    flux = grid.cos / grid.rho(geom) * prof.dvalues
    dflux = theta_derivative(flux, 1, grid, 1, "spectral")
    inner = slice(1, grid.n)
    w = grid.cos[inner] * grid.rho(geom)[inner]
    res = -lam * prof.values[inner] - dflux[inner] / w - h(grid.nodes[inner])
    return float(np.max(np.abs(res)))


# --- kernel -----------------------------------------------------------------------


def test_kernel_structure(oblate):
    K = build_kernel(6.5, oblate, ThetaGrid(64))
    assert np.all(K.values[:, 0] == 0.0)
    assert np.all(np.diag(K.values) == 0.0)
    assert np.all(np.triu(K.values) == 0.0)
    assert np.all(np.isfinite(K.values))
    F = np.concatenate([[0.0], K.Fnodes[1:]])
    bound = 6.5 * (F[-1] - F[1]) * np.max(area_weight(K.theta, oblate))
    assert np.max(np.abs(K.values)) <= bound


def test_kernel_vanishes_toward_pole(oblate):
    # K(0, t) = lam F(t) w(t) -> 0 as t -> -pi/2
    from ellipsoid_rh.geometry import F_values

    t = -math.pi / 2 + 10.0 ** -np.arange(2, 10)
    k = np.abs(6.0 * F_values(t, oblate) * area_weight(t, oblate))
    assert np.all(np.diff(k) < 0) and k[-1] < 1e-6


# --- resolvent --------------------------------------------------------------------


def test_resolvent_zero_kernel(oblate):
    K = build_kernel(6.0, oblate, ThetaGrid(32)).scaled(0.0)
    S = resolvent(K).values
    assert np.allclose(np.tril(S), np.tril(np.ones_like(S)), atol=1e-15)


def test_resolvent_diagonal_and_sphere_column(sphere):
    grid = ThetaGrid(128)
    S = resolvent(build_kernel(6.0, sphere, grid)).values
    assert np.all(np.diag(S) == 1.0)
    # the pole column is the Legendre polynomial P2(sin)
    col = S[:, 0]
    assert np.max(np.abs(col - 0.5 * (3 * np.sin(grid.left) ** 2 - 1))) < 1e-10
    assert abs(S[-1, 0]) > 1e-3


def test_resolvent_columns_match_ode_oracle(oblate):
    grid = ThetaGrid(128)
    lam = LAM21_B09
    S = resolvent(build_kernel(lam, oblate, grid)).values
    y = grid.left
    for j in (0, 10, 40):
        ref = resolvent_column(lam, 0.9, y[j], y[j:])
        assert np.max(np.abs(S[j:, j] - ref)) < 1e-8


def test_resolvent_integral_equation(oblate):
    # S(y, s) - 1 = int_s^y K(y, v) S(v, s) dv, checked with the product weights
    grid = ThetaGrid(64)
    K = build_kernel(5.0, oblate, grid)
    S = resolvent(K).values
    for j in (0, 7):
        W, _, _ = K.weights(j)
        lhs = S[j:, j] - 1.0
        rhs = W[j:, j:] @ S[j:, j]
        assert np.max(np.abs(lhs - rhs)) < 1e-12


# --- solve_zonal -------------------------------------------------------------------


def test_zero_forcing(oblate):
    u, C = solve_zonal(6.0, lambda t: 0.0 * t, oblate, ThetaGrid(64))
    assert C == 0.0
    assert np.all(u.values == 0.0)


def test_sphere_profile_and_constant(sphere):
    grid = ThetaGrid(256)
    u, C = solve_zonal(6.0, _cor(sphere), sphere, grid)
    assert np.max(np.abs(u.values + 0.5 * np.sin(grid.left))) < 1e-12
    assert C == pytest.approx(0.5, abs=1e-12)


def test_oblate_against_collocation_oracle(oblate, g21, grid128):
    g, C = g21
    ref, dref = collocation_zonal(LAM21_B09, 0.9, lambda x: 2 * x / np.sqrt(0.81 + 0.19 * x * x))
    assert np.max(np.abs(g.values - ref(grid128.nodes))) < 1e-6
    assert np.max(np.abs(g.dvalues - dref(grid128.nodes))) < 1e-6
    assert C == pytest.approx(C_G_B09, abs=1e-9)
    k = np.argmin(np.abs(grid128.nodes + 0.7))
    assert g.values[k] == pytest.approx(ref(grid128.nodes[k]), abs=1e-9)
    assert ref(-0.7) == pytest.approx(G_B09_AT_M07, abs=1e-13)


def test_sampled_forcing_path_agrees(oblate):
    grid = ThetaGrid(128)
    h = ZonalProfile(grid, coriolis(grid.nodes, oblate), odd=True)
    u1, C1 = solve_zonal(LAM21_B09, _cor(oblate), oblate, grid)
    u2, C2 = solve_zonal(LAM21_B09, h, oblate, grid)
    assert np.max(np.abs(u1.values - u2.values)) < 1e-9
    assert C1 == pytest.approx(C2, abs=1e-9)


def test_data_term_identity(oblate):
    """Generic data term for the Coriolis forcing equals omega * zone area."""
    grid = ThetaGrid(128)
    K = build_kernel(LAM21_B09, oblate, grid)
    W, A, _ = K.weights(0)
    closed = oblate.omega * zone_area(grid.left, oblate)
    r_call, _ = _forcing_data(_cor(oblate), K, A, W)
    r_prof, _ = _forcing_data(ZonalProfile(grid, coriolis(grid.nodes, oblate)), K, A, W)
    assert np.max(np.abs(r_call - closed)) < 1e-12
    assert np.max(np.abs(r_prof - closed)) < 1e-9


def test_resolvent_vanishing_at_odd_zonal_eigenvalue(sphere):
    with pytest.raises(ResolventVanishing):
        solve_zonal(2.0, _cor(sphere), sphere, ThetaGrid(64))


@pytest.mark.parametrize("n", [64, 128, 256])
def test_boundary_conditions(oblate, n):
    grid = ThetaGrid(n)
    g, _ = solve_g(LAM21_B09, oblate, grid)
    h = grid.h
    assert abs(pole_slope(g.values, h, -1)) <= 10 * h * h
    assert abs(pole_slope(g.values, h, +1)) <= 10 * h * h
    assert abs(g.dvalues[0]) <= 10 * h * h


def test_equator_curvature_small(oblate):
    vals = []
    for n in (128, 256, 512):
        grid = ThetaGrid(n)
        g, _ = solve_g(LAM21_B09, oblate, grid)
        vals.append(abs(equator_curvature(g.values[: grid.equator + 1], grid.h)))
    assert max(vals) <= 1e-4


def test_residual_and_convergence(oblate):
    h = _cor(oblate)
    res = []
    for n in (16, 32, 64):
        grid = ThetaGrid(n)
        g, _ = solve_g(LAM21_B09, oblate, grid, degree=3)
        res.append(ode_residual(g, LAM21_B09, oblate, h))
    grid = ThetaGrid(128)
    g, _ = solve_g(LAM21_B09, oblate, grid)
    assert ode_residual(g, LAM21_B09, oblate, h) <= 1e-5
    assert res[0] > res[1] > res[2]


def test_quadrature_orders_agree(oblate):
    grid = ThetaGrid(256)
    a, Ca = solve_g(LAM21_B09, oblate, grid, degree=3)
    b, Cb = solve_g(LAM21_B09, oblate, grid, degree=5)
    assert np.max(np.abs(a.values - b.values)) < 1e-8
    assert Ca == pytest.approx(Cb, abs=1e-8)


@given(k=st.floats(-10, 10))
@settings(max_examples=20)
def test_uniqueness_up_to_constant(k, g21, grid128):
    g, _ = g21
    ref, _ = collocation_zonal(LAM21_B09, 0.9, lambda x: 2 * x / np.sqrt(0.81 + 0.19 * x * x))
    diff = (ref(grid128.nodes) + k) - g.values
    assert np.var(diff) <= 1e-12


def test_forcings_are_odd(oblate):
    from ellipsoid_rh.waves import compute_P

    grid = ThetaGrid(64)
    c = coriolis(grid.nodes, oblate)
    assert np.array_equal(c, -c[::-1])
    P = compute_P(oblate, grid).values
    assert np.max(np.abs(P + P[::-1])) <= 1e-15


def test_even_legendre_coefficients_vanish(g21, grid128, oblate):
    g, _ = g21
    cc = grid128.area_quadrature(oblate) / grid128.rho(oblate)  # Clenshaw-Curtis in x
    x = grid128.sin
    for k in range(0, 12, 2):
        c = np.zeros(k + 1)
        c[k] = 1.0
        assert abs(np.sum(cc * g.values * leg.legval(x, c))) < 1e-14
    c = np.zeros(2)
    c[1] = 1.0
    assert abs(np.sum(cc * g.values * leg.legval(x, c))) > 1e-2


# --- odd extension ----------------------------------------------------------------


def test_odd_extend_basic():
    grid = ThetaGrid(32)
    left = ZonalProfile(grid, -np.sin(grid.left), half=True)
    full = odd_extend(left)
    assert np.allclose(full.values, -np.sin(grid.nodes), atol=1e-15)
    assert np.array_equal(full.values[: grid.equator + 1], left.values)
    assert np.array_equal(full.values, -full.values[::-1])


def test_odd_extend_rejects():
    grid = ThetaGrid(32)
    left = ZonalProfile(grid, np.cos(grid.left), half=True)
    with pytest.raises(NonvanishingAtOrigin):
        odd_extend(left)


# --- admissibility ----------------------------------------------------------------


def test_admissibility_zero_kernel(oblate):
    rep = kernel_admissibility(build_kernel(6.0, oblate, ThetaGrid(64)).scaled(0.0))
    assert rep.n_cells == 1
    assert rep.max_cell_mass == 0.0


def test_admissibility_sphere(sphere):
    rep = kernel_admissibility(build_kernel(6.0, sphere, ThetaGrid(128)))
    assert rep.max_cell_mass < 0.5
    assert rep.partition[0] == -math.pi / 2 and rep.partition[-1] == 0.0
    # small intervals carry small mass
    masses = [rep.small_interval_mass[k] for k in sorted(rep.small_interval_mass)]
    assert masses == sorted(masses)


def test_admissibility_scaled_needs_more_cells(sphere):
    K = build_kernel(6.0, sphere, ThetaGrid(256))
    a = kernel_admissibility(K)
    b = kernel_admissibility(K.scaled(100.0))
    assert b.n_cells > a.n_cells
    assert b.max_cell_mass <= b.gamma


def test_admissibility_row_mass_matches_quadrature(sphere):
    from scipy import integrate
    from ellipsoid_rh.geometry import F_primitive

    K = build_kernel(6.0, sphere, ThetaGrid(128))
    rep = kernel_admissibility(K)
    ref, _ = integrate.quad(lambda t: -6.0 * F_primitive(t, sphere) * area_weight(t, sphere),
                            -math.pi / 2, 0.0, limit=200)
    assert rep.max_row_mass == pytest.approx(ref, rel=1e-8)


def test_admissibility_refines_inside_grid_intervals(sphere):
    # cells narrower than the grid spacing are placed by root finding
    K = build_kernel(6.0, sphere, ThetaGrid(8)).scaled(1e3)
    rep = kernel_admissibility(K)
    assert rep.n_cells > 8
    assert rep.max_cell_mass <= rep.gamma * (1 + 1e-9)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_admissibility_failure_on_nonintegrable_rows(sphere):
    K = build_kernel(6.0, sphere, ThetaGrid(16)).scaled(float("inf"))
    with pytest.raises(AdmissibilityFailure) as err:
        kernel_admissibility(K)
    assert err.value.row is not None
