"""Eigenpairs of the Laplace-Beltrami operator on the oblate ellipsoid.

For a fixed azimuthal wavenumber ``m`` the eigenfunctions of ``-Delta`` have
the form ``y(theta) exp(i m phi)`` where ``y`` solves the singular
Sturm-Liouville problem

    d/dtheta[(cos/rho) y'] - (m^2 rho / cos) y = -lambda cos rho y.

The default solver is a Galerkin method in the variable ``x = sin(theta)``
whose basis functions are the normalized associated Legendre functions of
order ``|m|``. They satisfy the pole regularity conditions by construction and
make the sphere exactly diagonal, so the generalized symmetric eigenproblem
converges spectrally in the basis size. A second-order finite-volume solver
(``method="banded"``) on the latitude grid is provided as an independent
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg

from .errors import GridTooCoarse, InsufficientSamples, InvalidMode
from .geometry import EllipsoidGeometry, ThetaGrid, ZonalProfile, rho, zone_area


def normalized_legendre(m: int, lmax: int, x: np.ndarray, s: np.ndarray | None = None):
    """Associated Legendre functions normalized on ``[-1, 1]`` and their theta-derivatives.

    Returns arrays of shape ``(lmax - m + 1, len(x))`` holding ``P_l^m(x)``
    with ``int P^2 dx = 1`` and ``dP/dtheta`` where ``x = sin(theta)``.
    Passing ``s = cos(theta)`` avoids the cancellation in ``sqrt(1 - x^2)``
    near the poles.
    """
    m = abs(int(m))
    x = np.asarray(x, dtype=float)
    if s is None:
        s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    else:
        s = np.asarray(s, dtype=float)
    p = np.full_like(x, math.sqrt(0.5))
    for k in range(1, m + 1):
        p = math.sqrt((2 * k + 1) / (2 * k)) * s * p
    nl = lmax - m + 1
    out = np.zeros((nl, x.size))
    out[0] = p
    if nl > 1:
        out[1] = math.sqrt(2 * m + 3) * x * p
    for l in range(m + 2, lmax + 1):
        a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
        a_prev = math.sqrt((4 * (l - 1) ** 2 - 1) / ((l - 1) ** 2 - m * m))
        out[l - m] = a * (x * out[l - m - 1] - out[l - m - 2] / a_prev)

    # dP/dtheta = cos(theta) dP/dx, written with the recurrence to stay finite at the poles
    deriv = np.zeros_like(out)
    with np.errstate(divide="ignore", invalid="ignore"):
        for l in range(m, lmax + 1):
            num = -l * x * out[l - m]
            if l > m:
                num = num + math.sqrt((2 * l + 1) / (2 * l - 1) * (l * l - m * m)) * out[l - m - 1]
            deriv[l - m] = np.where(s > 0, num / np.where(s > 0, s, 1.0), 0.0)
    if m == 1:
        # derivative of a function ~ cos(theta) does not vanish at the poles
        pole = s == 0
        if np.any(pole):
            deriv[:, pole] = _pole_slope_m1(lmax, x[pole])
    return out, deriv


def _pole_slope_m1(lmax, xp):
    # for m = 1, P_l^1 = k_l cos(theta) p_l(sin) with p_l polynomial; dP/dtheta at the
    # pole is -k_l sin(theta) p_l(+-1)
    out = np.zeros((lmax, xp.size))
    for idx, xv in enumerate(xp):
        # same recurrence with the factor cos(theta) removed
        q = np.zeros(lmax)
        q0 = math.sqrt(0.5) * math.sqrt(1.5)
        q[0] = q0
        if lmax > 1:
            q[1] = math.sqrt(5) * xv * q0
        for l in range(3, lmax + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - 1))
            a_prev = math.sqrt((4 * (l - 1) ** 2 - 1) / ((l - 1) ** 2 - 1))
            q[l - 1] = a * (xv * q[l - 2] - q[l - 3] / a_prev)
        out[:, idx] = -xv * q
    return out


@dataclass
class EigenMode:
    """One eigenpair ``(lambda, y)`` of ``-Delta`` for wavenumber ``m``.

    ``y1`` multiplies ``exp(i m phi)`` and ``y2`` multiplies ``exp(-i m phi)``;
    the operator is real and depends on ``m`` only through ``m^2`` so
    ``y2 = y1``. Both are normalized by ``2 pi int y^2 w dtheta = 1``.
    ``coef`` holds the expansion in :func:`normalized_legendre` (or is ``None``
    for grid-only modes) and allows evaluation off the grid.
    """

    l: int
    m: int
    lam: float
    y1: ZonalProfile
    y2: ZonalProfile
    coef: np.ndarray | None = field(default=None, repr=False)
    geom: EllipsoidGeometry | None = None

    @property
    def lambda_(self) -> float:
        return self.lam

    def evaluate(self, theta, derivative: bool = False) -> np.ndarray:
        """Latitudinal eigenfunction (or its theta-derivative) at arbitrary latitudes."""
        theta = np.asarray(theta, dtype=float)
        if self.coef is None:
            raise ValueError("mode has no expansion; only grid samples are available")
        am = abs(self.m)
        P, D = normalized_legendre(am, am + self.coef.size - 1, np.sin(theta).ravel(),
                                   np.abs(np.cos(theta)).ravel())
        out = self.coef @ (D if derivative else P)
        return out.reshape(theta.shape)


def _sign_reference(values: np.ndarray) -> float:
    """Value of the first extremum north of the equator (pole counts as an endpoint)."""
    north = values[values.size // 2:]
    scale = np.max(np.abs(values))
    if scale == 0.0:
        return 0.0
    dv = np.diff(north)
    for k in range(1, north.size - 1):
        if dv[k - 1] * dv[k] < 0 and abs(north[k]) > 1e-8 * scale:
            return north[k]
    if abs(north[-1]) > 1e-8 * scale:
        return north[-1]
    return north[np.argmax(np.abs(north))]


def _galerkin(geom: EllipsoidGeometry, m: int, nbasis: int):
    am = abs(m)
    top = am + nbasis - 1
    nq = 4 * top + 64
    x, wq = leggauss(nq)
    r = np.sqrt(x * x + geom.b ** 2 * (1.0 - x * x))
    P, D = normalized_legendre(am, top, x)
    stiff = (D * (wq / r)) @ D.T
    if am:
        stiff += am * am * (P * (wq * r / (1.0 - x * x))) @ P.T
    mass = (P * (wq * r)) @ P.T
    lam, vec = linalg.eigh(stiff, mass)
    return lam, vec, mass


def solve_modes(geom: EllipsoidGeometry, m: int, lmax: int, grid: ThetaGrid,
                tol: float = 1e-10, method: str = "galerkin",
                nbasis: int | None = None) -> list[EigenMode]:
    """Eigenpairs for ``l = |m|, ..., lmax``, sorted by eigenvalue.

    Parameters
    ----------
    tol
        Convergence tolerance on eigenvalues; the Galerkin basis is enlarged
        until two successive sizes agree to this level.
    method
        ``"galerkin"`` (default, spectral accuracy) or ``"banded"``
        (second-order finite volume on ``grid``).
    """
    am = abs(int(m))
    if lmax < am:
        raise InvalidMode(f"lmax={lmax} < |m|={am}")
    if grid.n < 16 * max(lmax, 1):
        raise GridTooCoarse(f"grid with n={grid.n} cannot resolve degree {lmax} (need n >= 16*lmax)")
    count = lmax - am + 1
    if method == "banded":
        return _solve_banded(geom, int(m), count, grid, tol)
    if method != "galerkin":
        raise ValueError(f"unknown method {method!r}")

    nb = nbasis or count + 24
    lam, vec, mass = _galerkin(geom, am, nb)
    for _ in range(8):
        lam2, vec2, mass2 = _galerkin(geom, am, nb + 16)
        if np.max(np.abs(lam2[:count] - lam[:count]) / np.maximum(1.0, lam2[:count])) <= tol:
            lam, vec = lam2, vec2
            break
        nb += 16
        lam, vec, mass = lam2, vec2, mass2
    lam = lam[:count]
    vec = vec[:, :count]

    gaps = np.diff(lam) / np.maximum(np.abs(lam[1:]), 1.0)
    if gaps.size and np.min(gaps) < 10 * tol:
        raise GridTooCoarse("adjacent eigenvalues are not resolved")

    P, _ = normalized_legendre(am, am + vec.shape[0] - 1, grid.sin, grid.cos)
    modes = []
    for k in range(count):
        c = vec[:, k] / math.sqrt(2.0 * math.pi)  # eigh normalizes c^T M c = 1
        values = c @ P
        if am:
            values[0] = values[-1] = 0.0
        dense = c @ normalized_legendre(am, am + c.size - 1,
                                         np.sin(np.linspace(-0.5, 0.5, 4097) * math.pi))[0]
        if _sign_reference(dense) < 0:
            c, values = -c, -values
        lam_k = float(lam[k]) if abs(lam[k]) > 1e-13 else 0.0
        prof = ZonalProfile(grid, values, lam=lam_k)
        modes.append(EigenMode(am + k, int(m), lam_k, prof,
                               ZonalProfile(grid, values.copy(), lam=lam_k), c, geom))
    return modes


def _solve_banded(geom, m, count, grid, tol):
    # finite-volume discretization: unknowns at nodes, fluxes at midpoints
    am = abs(m)
    h = grid.h
    th = grid.nodes
    mid = 0.5 * (th[:-1] + th[1:])
    flux = np.cos(mid) / rho(mid, geom) / (h * h)
    edges = np.concatenate([[th[0]], mid, [th[-1]]])
    cell_mass = np.diff(zone_area(edges, geom)) / h
    diag = np.zeros(grid.size)
    diag[:-1] += flux
    diag[1:] += flux
    off = -flux
    if am:
        cs = np.cos(th[1:-1])
        diag[1:-1] += am * am * rho(th[1:-1], geom) / cs
        sl = slice(1, grid.size - 1)
        diag, off, cell_mass = diag[sl], off[1:-1], cell_mass[sl]
    scale = 1.0 / np.sqrt(cell_mass)
    d = diag * scale * scale
    e = off * scale[:-1] * scale[1:]
    lam, vec = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
    vec = vec * scale[:, None]
    q = grid.area_quadrature(geom)
    modes = []
    for k in range(count):
        values = np.zeros(grid.size)
        if am:
            values[1:-1] = vec[:, k]
        else:
            values[:] = vec[:, k]
        values /= math.sqrt(2.0 * math.pi * np.sum(q * values * values))
        if _sign_reference(values) < 0:
            values = -values
        lam_k = float(lam[k]) if abs(lam[k]) > 1e-13 else 0.0
        modes.append(EigenMode(am + k, m, lam_k, ZonalProfile(grid, values, lam=lam_k),
                               ZonalProfile(grid, values.copy(), lam=lam_k), None, geom))
    return modes


def perturbation_lambda1(l: int, m: int, beta: float) -> float:
    """First-order eigenvalue shift for ``b = 1 + eps * beta`` near the sphere."""
    if l == 0:
        return 0.0
    return -beta * 2 * l * (l + 1) / ((2 * l + 3) * (2 * l - 1)) * (2 * l * l - 2 * m * m + 2 * l - 1)


def perturbation_errors(l: int, m: int, beta: float, eps, omega: float = 1.0):
    """``|lambda(b) - l(l+1) - eps Lambda1|`` for each ``eps`` with ``b = 1 + eps beta``."""
    eps = np.asarray(eps, dtype=float)
    grid = ThetaGrid(max(64, 16 * l + 16))
    lam1 = perturbation_lambda1(l, m, beta)
    errs = np.empty_like(eps)
    for k, e in enumerate(eps):
        geom = EllipsoidGeometry(1.0 + e * beta, omega)
        mode = solve_modes(geom, m, l, grid, tol=1e-14)[-1]
        errs[k] = abs(mode.lam - l * (l + 1) - e * lam1)
    return errs


def verify_perturbation(l: int, m: int, beta: float = -1.0, eps=None) -> float:
    """Log-log slope of the first-order perturbation error against ``eps``.

    A slope near 2 confirms that the first-order formula is exact up to
    ``O(eps^2)``.
    """
    if eps is None:
        eps = 10.0 ** np.linspace(-2.0, -3.0, 6)
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if eps.size < 2 or np.unique(eps).size < 2:
        raise InsufficientSamples("need at least two distinct eps values")
    if np.any(1.0 + eps * beta > 1.0) or np.any(1.0 + eps * beta <= 0.0):
        raise ValueError("eps * beta must give 0 < b <= 1")
    errs = perturbation_errors(l, m, beta, eps)
    return float(np.polyfit(np.log(eps), np.log(errs), 1)[0])
