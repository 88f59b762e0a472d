"""Stream functions stored as longitudinal Fourier coefficients over a latitude grid.

Row ``m + mmax`` of the coefficient array holds ``psi_m(theta)`` so that

    psi(phi, theta) = sum_m psi_m(theta) exp(i m phi).

Products of fields (the Jacobian bracket in the Euler equation) are formed on
a physical longitude grid large enough that the truncation back to ``mmax``
is alias free (the 3/2 rule).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, GridTooCoarse
from .geometry import (
    EllipsoidGeometry,
    ThetaGrid,
    ZonalProfile,
    area_weight,
    coriolis,
    rho,
    theta_derivative,
)


@dataclass
class StreamFunctionField:
    """Band-limited field ``psi(phi, theta)`` on ``grid``.

    ``coeffs`` has shape ``(2 * mmax + 1, grid.size)`` and is complex.
    """

    grid: ThetaGrid
    mmax: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.mmax = int(self.mmax)
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (2 * self.mmax + 1, self.grid.size):
            raise ValueError(f"coeffs shape {coeffs.shape} does not match mmax={self.mmax}, "
                             f"grid size {self.grid.size}")
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, grid: ThetaGrid, mmax: int) -> "StreamFunctionField":
        return cls(grid, mmax, np.zeros((2 * mmax + 1, grid.size), dtype=complex))

    @classmethod
    def from_zonal(cls, profile: ZonalProfile, mmax: int = 0) -> "StreamFunctionField":
        out = cls.zeros(profile.grid, mmax)
        out.coeffs[mmax] = profile.values
        return out

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(-self.mmax, self.mmax + 1)

    def mode(self, m: int) -> np.ndarray:
        if abs(m) > self.mmax:
            return np.zeros(self.grid.size, dtype=complex)
        return self.coeffs[m + self.mmax]

    def copy(self) -> "StreamFunctionField":
        return StreamFunctionField(self.grid, self.mmax, self.coeffs.copy())

    def with_mmax(self, mmax: int) -> "StreamFunctionField":
        out = StreamFunctionField.zeros(self.grid, mmax)
        k = min(mmax, self.mmax)
        out.coeffs[mmax - k: mmax + k + 1] = self.coeffs[self.mmax - k: self.mmax + k + 1]
        return out

    def __add__(self, other: "StreamFunctionField") -> "StreamFunctionField":
        _check_compatible(self, other)
        return StreamFunctionField(self.grid, self.mmax, self.coeffs + other.coeffs)

    def __sub__(self, other: "StreamFunctionField") -> "StreamFunctionField":
        _check_compatible(self, other)
        return StreamFunctionField(self.grid, self.mmax, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "StreamFunctionField":
        return StreamFunctionField(self.grid, self.mmax, self.coeffs * scalar)

    __rmul__ = __mul__

    def is_real(self, tol: float = 1e-12) -> bool:
        """``coeff(-m) == conj(coeff(m))`` at every node."""
        return bool(np.max(np.abs(self.coeffs - self.coeffs[::-1].conj()), initial=0.0)
                    <= tol * max(1.0, np.max(np.abs(self.coeffs), initial=0.0)))

    def pole_regular(self, tol: float = 1e-12) -> bool:
        nonzonal = np.delete(self.coeffs, self.mmax, axis=0)
        return bool(np.max(np.abs(nonzonal[:, [0, -1]]), initial=0.0) <= tol)

    def parity(self) -> np.ndarray:
        return np.where(self.wavenumbers % 2 == 0, 1.0, -1.0)

    def to_physical(self, nphi: int | None = None):
        """Values on ``nphi`` equispaced longitudes; returns ``(phi, values)``.

        ``values`` has shape ``(nphi, grid.size)`` and is real when the field is.
        """
        nphi = nphi or 2 * self.mmax + 2
        return synthesize(self.coeffs, self.mmax, nphi, real=self.is_real())

    def to_csv(self, nphi: int | None = None) -> str:
        from .geometry import write_columns

        phi, values = self.to_physical(nphi)
        P, T = np.meshgrid(phi, self.grid.nodes, indexing="ij")
        return write_columns({"phi": P.ravel(), "theta": T.ravel(), "psi": np.real(values).ravel()})


def _check_compatible(a: StreamFunctionField, b: StreamFunctionField):
    if a.grid.n != b.grid.n or a.mmax != b.mmax:
        raise GridMismatch("fields live on different grids or bandwidths")


def synthesize(coeffs: np.ndarray, mmax: int, nphi: int, real: bool = False):
    """Evaluate Fourier coefficient rows on ``nphi`` longitudes."""
    if nphi < 2 * mmax + 1:
        raise GridTooCoarse(f"{nphi} longitudes cannot represent |m| <= {mmax}")
    spec = np.zeros((nphi, coeffs.shape[-1]), dtype=complex)
    m = np.arange(-mmax, mmax + 1)
    spec[m % nphi] = coeffs
    values = np.fft.ifft(spec, axis=0) * nphi
    phi = 2.0 * math.pi * np.arange(nphi) / nphi
    return phi, (values.real if real else values)


def analyze(values: np.ndarray, mmax: int) -> np.ndarray:
    """Inverse of :func:`synthesize`, truncated to ``|m| <= mmax``."""
    nphi = values.shape[0]
    spec = np.fft.fft(values, axis=0) / nphi
    m = np.arange(-mmax, mmax + 1)
    return spec[m % nphi]


# --- differential operators -------------------------------------------------------------


def theta_derivatives(psi: StreamFunctionField, order: int = 1, backend: str = "spectral",
                      fd_order: int = 6) -> np.ndarray:
    return theta_derivative(psi.coeffs, psi.parity(), psi.grid, order, backend, fd_order)


def laplacian_coeffs(coeffs: np.ndarray, mmax: int, grid: ThetaGrid, geom: EllipsoidGeometry,
                     backend: str = "spectral", fd_order: int = 6) -> np.ndarray:
    m = np.arange(-mmax, mmax + 1)
    parity = np.where(m % 2 == 0, 1.0, -1.0)
    d1 = theta_derivative(coeffs, parity, grid, 1, backend, fd_order)
    d2 = theta_derivative(coeffs, parity, grid, 2, backend, fd_order)
    inner = slice(1, grid.n)
    r = grid.rho(geom)[inner]
    c = grid.cos[inner]
    tan = grid.sin[inner] / c
    out = np.zeros_like(coeffs)
    out[:, 1:-1] = (-(m[:, None] ** 2) / c ** 2 * coeffs[:, 1:-1]
                    - tan / r ** 4 * d1[:, 1:-1]
                    + d2[:, 1:-1] / r ** 2)
    # at the poles rho = 1 and only the axisymmetric part survives: 2 psi''
    out[mmax, 0] = 2.0 * d2[mmax, 0]
    out[mmax, -1] = 2.0 * d2[mmax, -1]
    return out


def laplacian_apply(psi: StreamFunctionField, geom: EllipsoidGeometry,
                    backend: str = "spectral", fd_order: int = 6) -> StreamFunctionField:
    """Laplace-Beltrami operator applied mode by mode.

    Interior nodes use
    ``-(m^2/cos^2) psi_m - (tan/rho^4) psi_m' + psi_m''/rho^2``; pole values are
    the continuous limits.
    """
    return StreamFunctionField(psi.grid, psi.mmax,
                               laplacian_coeffs(psi.coeffs, psi.mmax, psi.grid, geom,
                                                backend, fd_order))


def velocity(psi: StreamFunctionField, geom: EllipsoidGeometry, backend: str = "spectral",
             fd_order: int = 6):
    """Velocity ``U = J grad psi`` in the orthonormal (east, north) frame.

    Returns coefficient arrays ``(u_east, u_north)``; pole rows are left at 0
    since the frame is singular there.
    """
    d1 = theta_derivatives(psi, 1, backend, fd_order)
    grid = psi.grid
    m = psi.wavenumbers[:, None]
    ue = np.zeros_like(psi.coeffs)
    un = np.zeros_like(psi.coeffs)
    ue[:, 1:-1] = -d1[:, 1:-1] / grid.rho(geom)[1:-1]
    un[:, 1:-1] = 1j * m * psi.coeffs[:, 1:-1] / grid.cos[1:-1]
    return ue, un


def divergence_of_velocity(psi: StreamFunctionField, geom: EllipsoidGeometry,
                           backend: str = "spectral", fd_order: int = 6) -> np.ndarray:
    """Coefficients of ``div U`` at interior nodes, computed from the flux form.

    ``div U = (1/w) [d_phi(w U^phi) + d_theta(w U^theta)]`` with coordinate
    components ``w U^phi = -psi_theta`` and ``w U^theta = psi_phi``.
    """
    m = psi.wavenumbers[:, None]
    par = psi.parity()
    d1 = theta_derivative(psi.coeffs, par, psi.grid, 1, backend, fd_order)
    flux_phi = -d1
    flux_theta = 1j * m * psi.coeffs
    dtheta = theta_derivative(flux_theta, par, psi.grid, 1, backend, fd_order)
    w = _node_weight(psi.grid, geom)[1:-1]
    return (1j * m * flux_phi + dtheta)[:, 1:-1] / w


def absolute_vorticity(psi: StreamFunctionField, geom: EllipsoidGeometry,
                       backend: str = "spectral", fd_order: int = 6) -> np.ndarray:
    q = laplacian_coeffs(psi.coeffs, psi.mmax, psi.grid, geom, backend, fd_order)
    q[psi.mmax] += 2.0 * geom.omega * psi.grid.sin / psi.grid.rho(geom)
    return q


def _node_weight(grid: ThetaGrid, geom: EllipsoidGeometry) -> np.ndarray:
    return grid.cos * grid.rho(geom)


def dealiased_nphi(mmax: int) -> int:
    """Smallest even longitude count for alias-free quadratic products (3/2 rule)."""
    n = 3 * mmax + 1
    return n + (n % 2)


def jacobian_physical(psi_coeffs, q_coeffs, mmax: int, grid: ThetaGrid, geom: EllipsoidGeometry,
                      nphi: int, backend: str = "spectral", fd_order: int = 6,
                      psi_theta=None, q_theta=None):
    """``(1/w)[-psi_theta q_phi + psi_phi q_theta]`` on an ``nphi`` x interior grid."""
    if nphi < dealiased_nphi(mmax):
        raise GridTooCoarse(f"{nphi} longitudes are too few to dealias |m| <= {mmax}")
    m = np.arange(-mmax, mmax + 1)
    parity = np.where(m % 2 == 0, 1.0, -1.0)
    if psi_theta is None:
        psi_theta = theta_derivative(psi_coeffs, parity, grid, 1, backend, fd_order)
    if q_theta is None:
        q_theta = theta_derivative(q_coeffs, parity, grid, 1, backend, fd_order)
    inner = slice(1, grid.n)
    fields = [psi_theta[:, inner], 1j * m[:, None] * q_coeffs[:, inner],
              1j * m[:, None] * psi_coeffs[:, inner], q_theta[:, inner]]
    pt, qp, pp, qt = (synthesize(f, mmax, nphi)[1] for f in fields)
    w = _node_weight(grid, geom)[inner]
    return (-pt * qp + pp * qt) / w


def jacobian_coeffs(psi_coeffs, q_coeffs, mmax: int, grid: ThetaGrid, geom: EllipsoidGeometry,
                    backend: str = "spectral", fd_order: int = 6) -> np.ndarray:
    """Fourier coefficients (``|m| <= mmax``) of the advection term, pole rows included.

    At the poles the bracket divided by ``w`` has a finite limit which only
    affects the axisymmetric coefficient; it equals ``B_0'(pole) / w'(pole)``
    where ``B_0`` is the axisymmetric part of the bracket.
    """
    nphi = dealiased_nphi(mmax)
    m = np.arange(-mmax, mmax + 1)
    parity = np.where(m % 2 == 0, 1.0, -1.0)
    psi_theta = theta_derivative(psi_coeffs, parity, grid, 1, backend, fd_order)
    q_theta = theta_derivative(q_coeffs, parity, grid, 1, backend, fd_order)
    fields = [psi_theta, 1j * m[:, None] * q_coeffs, 1j * m[:, None] * psi_coeffs, q_theta]
    pt, qp, pp, qt = (synthesize(f, mmax, nphi)[1] for f in fields)
    bracket = analyze(-pt * qp + pp * qt, mmax)
    out = np.zeros_like(bracket)
    w = _node_weight(grid, geom)[1:-1]
    out[:, 1:-1] = bracket[:, 1:-1] / w
    # bracket rows have the parity of (-1)^m times an odd factor (one theta derivative)
    db = theta_derivative(bracket[mmax], -1.0, grid, 1, backend, fd_order)
    # w'(-pi/2) = 1, w'(pi/2) = -1
    out[mmax, 0] = db[0]
    out[mmax, -1] = -db[-1]
    return out


def l2_norm_sq(coeffs: np.ndarray, grid: ThetaGrid, geom: EllipsoidGeometry) -> float:
    """``int |f|^2 dsigma`` by Parseval in longitude and Clenshaw-Curtis in latitude."""
    q = grid.area_quadrature(geom)
    return float(2.0 * math.pi * np.sum(np.abs(coeffs) ** 2 * q))
