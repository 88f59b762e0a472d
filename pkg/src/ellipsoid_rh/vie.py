"""Zonal profiles from a Volterra integral equation.

The axisymmetric problem

    -lambda u = (1/w) [(cos/rho) u']' + h,   u'(-pi/2) = 0,   u(0) = 0,

on the southern half ``[-pi/2, 0]`` is equivalent to the second-kind Volterra
equation

    u(y) = int_{-pi/2}^{y} K(y, t) u(t) dt + r_h(y) + C,
    K(y, t) = -lambda [F(y) - F(t)] w(t),
    r_h(y) = -int_{-pi/2}^{y} [F(y) - F(t)] w(t) h(t) dt,

where ``F' = rho / cos`` with ``F(0) = 0`` and ``C = u(-pi/2)`` is free. By
linearity ``u = u_r + C u_1`` where ``u_r`` solves the equation with ``C = 0``
and ``u_1 = S(., -pi/2)`` is the resolvent column at the pole; the condition
``u(0) = 0`` fixes ``C = -u_r(0) / S(0, -pi/2)``.

Discretization is by product integration: the unknown is replaced by its
local Lagrange interpolant (degree 5 by default) on the uniform half grid and
the moments ``int w l_j`` and ``int F w l_j`` of the Lagrange basis are
integrated accurately, with the logarithmic part of ``F`` at the pole handled
by a log-weighted rule. The first few rows are solved as one implicit block
so the start-up stencils keep the full order, which stays intact in spite of
the divergence of ``F`` at the pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, linalg
from scipy.optimize import brentq

from .errors import (
    AdmissibilityFailure,
    NonvanishingAtOrigin,
    QuadratureBreakdown,
    ResolventVanishing,
)
from .geometry import (
    HALF_PI,
    EllipsoidGeometry,
    F_minus_log,
    F_values,
    ThetaGrid,
    ZonalProfile,
    area_weight,
    rho,
)

_NGL = 16
_GL_T, _GL_W = leggauss(_NGL)
_GL_T = 0.5 * (_GL_T + 1.0)
_GL_W = 0.5 * _GL_W

Forcing = Union[ZonalProfile, Callable[[np.ndarray], np.ndarray]]


def _lagrange(offsets, t):
    offsets = np.asarray(offsets, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.ones((offsets.size,) + t.shape)
    for j, oj in enumerate(offsets):
        for k, ok in enumerate(offsets):
            if k != j:
                out[j] *= (t - ok) / (oj - ok)
    return out


class _PanelMoments:
    """Moments ``int_panel w l_j`` and ``int_panel F w l_j`` of local Lagrange bases.

    Panel ``p`` is ``[y_p, y_{p+1}]`` on the southern half grid; a stencil is a
    tuple of node offsets relative to ``p``.
    """

    def __init__(self, geom: EllipsoidGeometry, grid: ThetaGrid, degree: int = 5):
        if degree not in (3, 5):
            raise ValueError("interpolation degree must be 3 or 5")
        self.geom = geom
        self.grid = grid
        self.width = degree + 1
        M = grid.n // 2
        h = grid.h
        y = grid.left
        self.M = M
        pts = y[:M, None] + h * _GL_T[None, :]
        self.wv = area_weight(pts, geom)
        Fv = np.empty_like(pts)
        Fv[1:] = F_values(pts[1:], geom)
        # first panel: F = log(theta + pi/2) + smooth part; the log goes to a weighted rule
        Fv[0] = F_minus_log(pts[0], geom) + math.log(h)
        self.Fv = Fv
        self._cache = {}

    def _log_moment(self, offs):
        # int_0^1 log(t) w(-pi/2 + h t) l_j(t) dt
        h = self.grid.h
        out = np.empty(len(offs))
        for j in range(len(offs)):
            f = lambda t, j=j: (area_weight(-HALF_PI + h * t, self.geom)
                                * _lagrange(offs, t)[j])
            out[j], _ = integrate.quad(f, 0.0, 1.0, weight="alg-loga", wvar=(0.0, 0.0),
                                       epsabs=1e-17, epsrel=1e-13, limit=100)
        return out

    def moments(self, offs):
        """``(a, b)`` of shape ``(M, len(offs))`` for every panel."""
        offs = tuple(offs)
        if offs not in self._cache:
            h = self.grid.h
            basis = _lagrange(offs, _GL_T)
            a = h * (self.wv * _GL_W) @ basis.T
            b = h * (self.wv * self.Fv * _GL_W) @ basis.T
            b[0] += h * self._log_moment(offs)
            self._cache[offs] = (a, b)
        return self._cache[offs]

    def rows(self, start: int = 0):
        """Dense moment matrices ``A, B`` for integrals from node ``start`` to node ``i``.

        Returns the matrices and the size of the implicit starting block.
        """
        M, j = self.M, start
        s = self.width
        half = s // 2
        size = M + 1
        A = np.zeros((size, size))
        B = np.zeros((size, size))
        if j + s - 1 > M:
            # near the equator: a single polynomial through all remaining nodes
            nodes = np.arange(j, M + 1)
            for i in range(j + 1, M + 1):
                for p in range(j, i):
                    a, b = self.moments(tuple(nodes - p))
                    A[i, nodes] += a[p]
                    B[i, nodes] += b[p]
            return A, B, M + 1 - j
        block = np.arange(j, j + s)
        # rows inside the starting block use the stencil on nodes j .. j+s-1
        for i in range(j + 1, j + s - 1):
            for p in range(j, i):
                a, b = self.moments(tuple(block - p))
                A[i, block] += a[p]
                B[i, block] += b[p]
        rows_i = np.arange(j + s - 1, M + 1)
        center = tuple(range(1 - half, half + 1))
        ac, bc = self.moments(center)
        pc = np.arange(max(j + half - 1, half - 1), M - half + 1)
        cols = pc[:, None] + np.array(center)[None, :]
        for mat, mom in ((A, ac), (B, bc)):
            scatter = np.zeros((M, size))
            if pc.size:
                scatter[pc] = _scatter_rows(mom[pc], cols, size)
            cum = np.cumsum(scatter, axis=0)
            mat[rows_i] += cum[rows_i - half] - cum[j + half - 2] if j + half - 2 >= 0 else cum[rows_i - half]
        # leading panels share the stencil anchored at node j
        for p in range(j, j + half - 1):
            a, b = self.moments(tuple(block - p))
            A[np.ix_(rows_i, block)] += a[p]
            B[np.ix_(rows_i, block)] += b[p]
        # trailing panels use the stencil ending at node i
        for k in range(1, half):
            offs = tuple(range(k - s + 1, k + 1))
            a, b = self.moments(offs)
            p = rows_i - k
            cols_end = rows_i[:, None] + np.arange(1 - s, 1)[None, :]
            np.add.at(A, (np.repeat(rows_i, s), cols_end.ravel()), a[p].ravel())
            np.add.at(B, (np.repeat(rows_i, s), cols_end.ravel()), b[p].ravel())
        return A, B, s


def _scatter_rows(values, cols, size):
    out = np.zeros((values.shape[0], size))
    np.put_along_axis(out, cols, values, axis=1)
    return out


@dataclass
class VolterraKernel:
    """Samples ``K(y_i, t_j)`` on the southern half grid plus the quadrature data.

    ``values`` is lower triangular with a zero first column (the kernel's value
    at the pole) and a zero diagonal.
    """

    grid: ThetaGrid
    lam: float
    geom: EllipsoidGeometry
    values: np.ndarray = field(repr=False)
    moments: _PanelMoments = field(repr=False)
    Fnodes: np.ndarray = field(repr=False)

    @property
    def theta(self) -> np.ndarray:
        return self.grid.left

    def weights(self, start: int = 0):
        """Product-integration matrix ``W``, the moment matrix ``A`` and the start-block size.

        ``(W u)_i`` approximates ``int_{y_start}^{y_i} K(y_i, t) u(t) dt`` and
        ``(A u)_i`` approximates ``int_{y_start}^{y_i} w(t) u(t) dt``.
        """
        A, B, block = self.moments.rows(start)
        W = self.lam * (B - self.Fnodes[:, None] * A)
        W[: start + 1] = 0.0
        return W, A, block

    def scaled(self, factor: float) -> "VolterraKernel":
        """The kernel multiplied by ``factor`` (equivalently, ``lambda`` scaled)."""
        return VolterraKernel(self.grid, self.lam * factor, self.geom, self.values * factor,
                              self.moments, self.Fnodes)


def build_kernel(lam: float, geom: EllipsoidGeometry, grid: ThetaGrid,
                 degree: int = 5) -> VolterraKernel:
    """Sample ``K(y, t) = -lambda [F(y) - F(t)] w(t)`` and set up the quadrature.

    ``degree`` is the local interpolation degree of the product rule (3 or 5).
    """
    y = grid.left
    M = grid.n // 2
    Fn = np.zeros(M + 1)
    Fn[1:] = F_values(y[1:], geom)
    w = area_weight(y, geom)
    K = -lam * (Fn[:, None] - Fn[None, :]) * w[None, :]
    K = np.tril(K, -1)
    K[:, 0] = 0.0
    K[0] = 0.0
    return VolterraKernel(grid, float(lam), geom, K, _PanelMoments(geom, grid, degree), Fn)


@dataclass
class Resolvent:
    """Lower-triangular samples ``S(y_i, s_j)`` with unit diagonal."""

    grid: ThetaGrid
    values: np.ndarray = field(repr=False)


def _triangular_solve(W: np.ndarray, rhs: np.ndarray, block: int) -> np.ndarray:
    """Solve ``(I - W) x = rhs`` where ``W`` is lower triangular apart from a
    leading ``block`` x ``block`` starting block."""
    system = np.eye(W.shape[0]) - W
    if not np.all(np.isfinite(system)):
        raise QuadratureBreakdown("Volterra system has non-finite entries")
    k = min(block, system.shape[0])
    head = system[:k, :k]
    if abs(np.linalg.det(head)) < 1e-12 or np.min(np.abs(np.diag(system[k:, k:])), initial=1.0) < 1e-12:
        raise QuadratureBreakdown("Volterra system is numerically singular")
    x = np.empty_like(rhs, dtype=float)
    x[:k] = np.linalg.solve(head, rhs[:k])
    if system.shape[0] > k:
        x[k:] = linalg.solve_triangular(system[k:, k:], rhs[k:] - system[k:, :k] @ x[:k],
                                        lower=True, check_finite=False)
    return x


def resolvent(K: VolterraKernel) -> Resolvent:
    """Resolvent ``S(y, s) = 1 + int_s^y K(y, v) S(v, s) dv`` column by column.

    Each source column is a forward substitution with product weights that
    start at ``s``. Cost is cubic in the number of half-grid nodes.
    """
    M = K.grid.n // 2
    S = np.zeros((M + 1, M + 1))
    for j in range(M + 1):
        W, _, block = K.weights(j)
        S[j:, j] = _triangular_solve(W[j:, j:], np.ones(M + 1 - j), block)
    np.fill_diagonal(S, 1.0)
    return Resolvent(K.grid, S)


def _forcing_data(forcing, K: VolterraKernel, A: np.ndarray, W: np.ndarray, H=None):
    """Return ``(r, H)`` at the half-grid nodes for the supplied forcing."""
    grid, geom = K.grid, K.geom
    y = grid.left
    M = grid.n // 2
    if isinstance(forcing, ZonalProfile):
        if forcing.grid.n != grid.n:
            raise ValueError("forcing lives on a different grid")
        hv = forcing.values if forcing.half else forcing.values[: M + 1]
        Hn = A @ hv
        # r_h = (B - F A) h  =  W h / lambda
        A_, B_, _ = K.moments.rows(0)
        r = (B_ - K.Fnodes[:, None] * A_) @ hv
        r[0] = 0.0
        return r, Hn
    h = grid.h
    pts = y[:M, None] + h * _GL_T[None, :]
    if H is None:
        # H(s) = int_{-pi/2}^s w h by nested Gauss-Legendre per panel
        panel_int = h * ((area_weight(pts, geom) * forcing(pts)) @ _GL_W)
        whole = np.concatenate([[0.0], np.cumsum(panel_int)])

        def H(s):
            s = np.asarray(s, dtype=float)
            flat = s.ravel()
            base = np.floor((flat + HALF_PI) / h).astype(int).clip(0, M - 1)
            left = y[base]
            inner = left[:, None] + (flat - left)[:, None] * _GL_T[None, :]
            part = (flat - left) * ((area_weight(inner, geom) * forcing(inner)) @ _GL_W)
            return (whole[base] + part).reshape(s.shape)

    Hn = np.asarray(H(y), dtype=float)
    dF = rho(pts, geom) / np.cos(pts)
    rprime = -dF * H(pts)
    r = np.concatenate([[0.0], np.cumsum(h * (rprime @ _GL_W))])
    return r, Hn


def solve_zonal(lam: float, forcing: Forcing, geom: EllipsoidGeometry, grid: ThetaGrid,
                H=None, kernel: VolterraKernel | None = None,
                return_derivative: bool = False):
    """Solve the zonal problem on ``[-pi/2, 0]`` with ``u(0) = 0``.

    Parameters
    ----------
    forcing
        Either a callable ``h(theta)`` (preferred; the data term is then
        integrated from its derivative) or a sampled :class:`ZonalProfile`.
    H
        Optional closed form of ``int_{-pi/2}^{s} w h``; used with callables.

    Returns
    -------
    u : ZonalProfile
        Half-grid profile with ``u(0) = 0``.
    C : float
        The free constant, equal to ``u(-pi/2)``.
    du : ndarray, optional
        ``u'`` at the half-grid nodes from the flux identity
        ``(cos/rho) u' = -int w (lambda u + h)``; also stored as ``u.dvalues``.
    """
    K = kernel if kernel is not None else build_kernel(lam, geom, grid)
    if K.grid.n != grid.n or K.lam != lam:
        raise ValueError("kernel does not match lambda/grid")
    W, A, block = K.weights(0)
    r, Hn = _forcing_data(forcing, K, A, W, H)
    M = grid.n // 2
    sol = _triangular_solve(W, np.column_stack([r, np.ones(M + 1)]), block)
    u_r, u_1 = sol[:, 0], sol[:, 1]
    s0 = u_1[-1]
    if abs(s0) < 1e-10:
        raise ResolventVanishing(f"S(0, -pi/2) = {s0:.3e}")
    C = -u_r[-1] / s0
    u = u_r + C * u_1
    u[-1] = 0.0
    y = grid.left
    du = np.zeros(M + 1)
    du[1:] = -(rho(y[1:], geom) / grid.cos[1:M + 1]) * (lam * (A[1:] @ u) + Hn[1:])
    prof = ZonalProfile(grid, u, half=True, lam=float(lam), dvalues=du)
    if not return_derivative:
        return prof, float(C)
    return prof, float(C), du


def odd_extend(u_left: ZonalProfile, tol: float = 1e-10) -> ZonalProfile:
    """Odd continuation of a southern-half profile that vanishes at the equator."""
    if not u_left.half:
        raise ValueError("expected a half-grid profile")
    v = u_left.values
    if abs(v[-1]) > tol:
        raise NonvanishingAtOrigin(f"u(0) = {v[-1]:.3e}")
    full = np.concatenate([v, -v[-2::-1]])
    full[u_left.grid.equator] = 0.0
    d = None if u_left.dvalues is None else even_extend(u_left.dvalues)
    return ZonalProfile(u_left.grid, full, odd=True, lam=u_left.lam, dvalues=d)


def even_extend(values: np.ndarray) -> np.ndarray:
    """Even continuation of half-grid samples (used for derivatives of odd profiles)."""
    return np.concatenate([values, values[-2::-1]])


@dataclass
class AdmissibilityReport:
    partition: np.ndarray
    max_cell_mass: float
    gamma: float
    max_row_mass: float
    small_interval_mass: dict

    @property
    def n_cells(self) -> int:
        return self.partition.size - 1


def kernel_admissibility(K: VolterraKernel, gamma: float = 0.45) -> AdmissibilityReport:
    """Check integrability and the small-cell condition for the Volterra kernel.

    For ``lambda > 0`` the kernel is non-positive and ``|K(y, v)| <= |K(0, v)|``
    because ``F`` is increasing with ``F(0) = 0``. Cell masses of the row at
    ``y = 0`` therefore bound those of every row. Its cumulative mass is
    continuous in the cut point, so a greedy sweep that places each cut where
    the running mass reaches ``gamma`` (by root finding inside a grid
    interval) always succeeds when the rows are integrable.
    """
    if not 0.0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    grid = K.grid
    y = grid.left
    A, B, _ = K.moments.rows(0)
    lam = abs(K.lam)
    area = A.sum(axis=1)
    fw = B.sum(axis=1)
    # |K(0, .)| mass from the pole up to y_i and the full mass of each row
    cum = -lam * fw
    row_mass = lam * (K.Fnodes * area - fw)
    bad = ~np.isfinite(row_mass) | ~np.isfinite(cum)
    if np.any(bad):
        raise AdmissibilityFailure("row mass is not finite", row=int(np.argmax(bad)))
    if lam == 0.0:
        return AdmissibilityReport(np.array([y[0], y[-1]]), 0.0, gamma, 0.0,
                                   {k * grid.h: 0.0 for k in (1, 2, 4, 8)})

    def density(t):
        return lam * np.abs(F_values(t, K.geom)) * area_weight(t, K.geom)

    def mass_at(t):
        # node values from the product moments; inside an interval the
        # increment is split in proportion to a Gauss-Legendre partial integral
        i = int(np.clip(np.searchsorted(y, t, side="right") - 1, 0, y.size - 2))
        lo, hi = y[i], y[i + 1]
        if t <= lo:
            return cum[i]
        full = (hi - lo) * (density(lo + (hi - lo) * _GL_T) @ _GL_W)
        part = (t - lo) * (density(lo + (t - lo) * _GL_T) @ _GL_W)
        return cum[i] + (cum[i + 1] - cum[i]) * min(part / full, 1.0)

    cuts = [y[0]]
    total = cum[-1]
    while total - mass_at(cuts[-1]) > gamma:
        target = mass_at(cuts[-1]) + gamma * (1.0 - 1e-9)
        j = int(np.searchsorted(cum, target))
        lo = max(y[j - 1], cuts[-1])
        cut = brentq(lambda t: mass_at(t) - target, lo, y[j], xtol=1e-15, rtol=1e-14)
        if cut <= cuts[-1]:
            raise AdmissibilityFailure("partition does not advance", row=y.size - 1,
                                       cell=(cuts[-1], y[j]))
        cuts.append(cut)
    cuts.append(y[-1])
    part = np.array(cuts)
    masses = np.diff([mass_at(t) for t in part])
    if np.max(masses) > gamma * (1 + 1e-9):
        k = int(np.argmax(masses))
        raise AdmissibilityFailure(f"cell mass {masses[k]:.3g} exceeds {gamma}",
                                   row=y.size - 1, cell=(part[k], part[k + 1]))
    M = y.size - 1
    small = {}
    for k in (1, 2, 4, 8):
        if k <= M:
            small[k * grid.h] = float(np.max(cum[k:] - cum[:-k]))
    return AdmissibilityReport(part, float(np.max(masses)), gamma,
                               float(np.max(np.abs(row_mass))), small)
