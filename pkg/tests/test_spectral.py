import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ellipsoid_rh.errors import GridTooCoarse, InsufficientSamples, InvalidMode
from ellipsoid_rh.fields import StreamFunctionField, laplacian_apply
from ellipsoid_rh.geometry import EllipsoidGeometry, ThetaGrid
from ellipsoid_rh.spectral import (
    normalized_legendre,
    perturbation_errors,
    perturbation_lambda1,
    solve_modes,
    verify_perturbation,
)
from scipy.special import lpmv

from conftest import LAM21_B09
from oracles import collocation_eigenvalues


def test_sphere_m0():
    lam = [md.lam for md in solve_modes(EllipsoidGeometry(1.0), 0, 3, ThetaGrid(64))]
    assert np.allclose(lam, [0, 2, 6, 12], atol=1e-10)


def test_sphere_m1_legendre_shape():
    grid = ThetaGrid(128)
    modes = solve_modes(EllipsoidGeometry(1.0), 1, 3, grid)
    assert np.allclose([md.lam for md in modes], [2, 6, 12], atol=1e-10)
    q = grid.area_quadrature(EllipsoidGeometry(1.0))
    for md in modes:
        ref = lpmv(1, md.l, grid.sin)
        ref = ref / math.sqrt(2 * math.pi * np.sum(q * ref * ref))
        # same function up to sign
        assert min(np.max(np.abs(md.y1.values - ref)), np.max(np.abs(md.y1.values + ref))) < 1e-10


def test_normalized_legendre_orthonormal():
    grid = ThetaGrid(256)
    q = grid.area_quadrature(EllipsoidGeometry(1.0))
    P, _ = normalized_legendre(2, 9, grid.sin, grid.cos)
    # unit norm in x = sin(theta), i.e. int P^2 w dtheta = 1 on the sphere
    G = (P * q) @ P.T
    assert np.allclose(G, np.eye(P.shape[0]), atol=1e-12)


def test_oblate_eigenvalue_against_collocation_oracle(oblate, mode21):
    assert mode21.lam == pytest.approx(LAM21_B09, abs=1e-9)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_oblate_spectrum_against_oracle(m):
    geom = EllipsoidGeometry(0.7)
    lam = [md.lam for md in solve_modes(geom, m, m + 4, ThetaGrid(128))]
    assert np.allclose(lam, collocation_eigenvalues(0.7, m, 5), atol=1e-8)


def test_banded_agrees_with_galerkin(oblate):
    grid = ThetaGrid(1024)
    a = solve_modes(oblate, 2, 5, grid)
    b = solve_modes(oblate, 2, 5, grid, method="banded")
    for x, y in zip(a, b):
        assert abs(x.lam - y.lam) < 1e-4 * x.lam
        assert np.max(np.abs(x.y1.values - y.y1.values)) < 1e-3


def test_small_flattening_prediction():
    geom = EllipsoidGeometry(0.99)
    lam = solve_modes(geom, 1, 2, ThetaGrid(64))[-1].lam
    assert abs(lam - (6 + 0.01 * 36 / 7)) < 1e-3
    assert abs(lam - (6 + 0.01 * 36 / 7)) > 1e-6  # second-order term is visible


def test_invalid_mode():
    with pytest.raises(InvalidMode):
        solve_modes(EllipsoidGeometry(1.0), 3, 2, ThetaGrid(64))


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        solve_modes(EllipsoidGeometry(1.0), 0, 8, ThetaGrid(64))


def test_orthonormality_and_pole_regularity(oblate):
    grid = ThetaGrid(256)
    q = grid.area_quadrature(oblate)
    for m in (0, 1, 3):
        modes = solve_modes(oblate, m, m + 4, grid)
        Y = np.array([md.y1.values for md in modes])
        G = 2 * math.pi * (Y * q) @ Y.T
        assert np.max(np.abs(G - np.eye(len(modes)))) < 1e-8
        if m:
            assert all(md.y1.values[0] == 0.0 and md.y1.values[-1] == 0.0 for md in modes)


def test_multiplicity_pm_m(oblate):
    grid = ThetaGrid(128)
    for m in (1, 2):
        a = [md.lam for md in solve_modes(oblate, m, 4, grid)]
        b = [md.lam for md in solve_modes(oblate, -m, 4, grid)]
        assert np.allclose(a, b, rtol=1e-12)


def test_zonal_spectrum_simple(oblate):
    lam = [md.lam for md in solve_modes(oblate, 0, 6, ThetaGrid(128))]
    assert np.min(np.diff(lam)) > 1.0


def test_sign_convention_reproducible(oblate):
    a = solve_modes(oblate, 1, 3, ThetaGrid(128))
    b = solve_modes(oblate, 1, 3, ThetaGrid(256))
    for x, y in zip(a, b):
        assert np.max(np.abs(x.y1.values - y.y1.values[::2])) < 1e-10


@pytest.mark.parametrize("m", [0, 1, 2])
def test_eigenfunction_residual(oblate, m):
    grid = ThetaGrid(512)
    for md in solve_modes(oblate, m, m + 3, grid):
        psi = StreamFunctionField.zeros(grid, m)
        psi.coeffs[2 * m] = md.y1.values
        out = laplacian_apply(psi, oblate)
        assert np.max(np.abs(out.coeffs[2 * m] + md.lam * md.y1.values)) <= 1e-5


def test_evaluate_matches_samples(mode21):
    th = mode21.y1.grid.nodes
    assert np.allclose(mode21.evaluate(th), mode21.y1.values, atol=1e-12)


def test_sphere_exactness_up_to_l8():
    grid = ThetaGrid(1024)
    geom = EllipsoidGeometry(1.0)
    for m in range(9):
        for md in solve_modes(geom, m, 8, grid):
            assert abs(md.lam - md.l * (md.l + 1)) <= 1e-6


# --- first-order perturbation -----------------------------------------------------


def test_lambda1_examples():
    assert perturbation_lambda1(2, 1, -1.0) == pytest.approx(36 / 7, rel=1e-15)
    assert perturbation_lambda1(0, 0, 3.0) == 0.0
    assert perturbation_lambda1(2, -1, -1.0) == perturbation_lambda1(2, 1, -1.0)


@given(l=st.integers(1, 10), data=st.data(), beta=st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3))
def test_lambda1_linear_in_beta_even_in_m(l, data, beta):
    m = data.draw(st.integers(-l, l))
    assert perturbation_lambda1(l, m, beta) == pytest.approx(-beta * perturbation_lambda1(l, m, -1.0))
    assert perturbation_lambda1(l, m, beta) == perturbation_lambda1(l, -m, beta)


@pytest.mark.parametrize("l,m", [(2, 1), (3, 2)])
def test_perturbation_slope(l, m):
    assert verify_perturbation(l, m, -1.0) >= 1.8
    assert verify_perturbation(l, m, -1.0) == pytest.approx(2.0, abs=0.05)


def test_perturbation_first_order_matches_finite_difference():
    eps = np.array([1e-4, 2e-4])
    errs = perturbation_errors(2, 1, -1.0, eps)
    assert np.all(errs < 10 * eps ** 2 * 10)


def test_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        verify_perturbation(2, 1, -1.0, eps=[1e-2])
    with pytest.raises(InsufficientSamples):
        verify_perturbation(2, 1, -1.0, eps=[1e-2, 1e-2])
