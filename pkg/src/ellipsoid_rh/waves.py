"""Stationary and rigidly rotating Rossby-Haurwitz stream functions.

A stationary solution is ``psi = g(theta) + Y(phi, theta)`` where ``Y`` lies in
one eigenspace of ``-Delta`` (eigenvalue ``lam``) and the odd zonal profile
``g`` solves

    -lam g = Delta g + 2 omega sin / rho.

Then ``q = Delta psi + coriolis = -lam psi`` is a function of ``psi`` and the
Jacobian bracket vanishes. A traveling solution adds ``c lam f`` to the zonal
part, where ``f`` solves the same equation with forcing
``P(theta) = int_{-pi/2}^{theta} w - int_{-pi/2}^{0} w``, and moves ``Y``
eastward with angular speed ``c``:

    psi_c(phi, theta, t) = g + c lam f + Y(phi - c t, theta).

On the sphere ``f = sin / (2 - lam)`` and the zonal part is
``(2 omega + lam c) / (2 - lam) sin``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModeMismatch, ResolventVanishing, ResonantMode
from .fields import (
    StreamFunctionField,
    absolute_vorticity,
    jacobian_physical,
    dealiased_nphi,
    synthesize,
)
from .geometry import (
    EllipsoidGeometry,
    ThetaGrid,
    ZonalProfile,
    _area_antiderivative,
    coriolis,
)
from .spectral import EigenMode, solve_modes
from .vie import build_kernel, odd_extend, solve_zonal


def compute_P(geom: EllipsoidGeometry, grid: ThetaGrid) -> ZonalProfile:
    """Zone area measured from the equator: ``P(theta) = int_0^theta w``.

    Equivalent to the area south of ``theta`` minus the area of the southern
    hemisphere; odd, with ``P(+-pi/2) = +-A/2``.
    """
    values = _area_antiderivative(grid.sin, geom)
    return ZonalProfile(grid, values, odd=True, dvalues=grid.cos * grid.rho(geom))


def _P(theta, geom):
    return _area_antiderivative(np.sin(theta), geom)


def check_resonance(lam: float, geom: EllipsoidGeometry, tol: float = 1e-8):
    """Raise :class:`ResonantMode` when ``lam`` is an eigenvalue of an odd zonal mode.

    The zonal equations then lose uniqueness; on the sphere this is ``l = 1``.
    """
    top = 3
    while True:
        modes = solve_modes(geom, 0, top, ThetaGrid(16 * top + 16))
        if modes[-1].lam > lam + 1.0 or top > 64:
            break
        top *= 2
    for mode in modes:
        if mode.l % 2 == 1 and abs(mode.lam - lam) <= tol * max(1.0, abs(lam)):
            raise ResonantMode(f"lambda = {lam:.12g} coincides with the odd zonal mode l = {mode.l}")


def _zonal(lam, forcing, H, geom, grid, degree):
    try:
        check_resonance(lam, geom)
        u, C = solve_zonal(lam, forcing, geom, grid, H=H,
                           kernel=build_kernel(lam, geom, grid, degree))
    except ResolventVanishing as exc:
        raise ResonantMode(str(exc)) from exc
    prof = odd_extend(u)
    return prof, C


def solve_g(lam: float, geom: EllipsoidGeometry, grid: ThetaGrid, degree: int = 5):
    """Odd zonal profile for the Coriolis forcing; returns ``(g, C)`` with ``C = g(-pi/2)``."""
    return _zonal(lam, lambda t: coriolis(t, geom),
                  lambda s: -geom.omega * np.cos(s) ** 2, geom, grid, degree)


def solve_f(lam: float, geom: EllipsoidGeometry, grid: ThetaGrid, degree: int = 5) -> ZonalProfile:
    """Odd zonal profile for the forcing ``P``."""
    p_south = _P(-0.5 * math.pi, geom)
    f, _ = _zonal(lam, lambda t: _P(t, geom),
                  lambda s: 0.5 * (_P(s, geom) ** 2 - p_south ** 2), geom, grid, degree)
    return f


def _check_mode(mode: EigenMode, *profiles: ZonalProfile):
    for prof in profiles:
        if prof.lam is None or abs(prof.lam - mode.lam) > 1e-10 * max(1.0, abs(mode.lam)):
            raise ModeMismatch(f"profile solved for lambda={prof.lam}, mode has {mode.lam}")
        if prof.grid.n != mode.y1.grid.n:
            raise ModeMismatch("profile and mode live on different grids")


def _field(mode, a1, a2, zonal, phase=0.0):
    m = abs(mode.m)
    grid = mode.y1.grid
    psi = StreamFunctionField.zeros(grid, max(m, 0))
    psi.coeffs[m] += zonal
    rot = np.exp(-1j * m * phase)
    if m == 0:
        psi.coeffs[0] += (a1 + a2) * mode.y1.values
    else:
        psi.coeffs[m + m] += a1 * rot * mode.y1.values
        psi.coeffs[0] += a2 * np.conj(rot) * mode.y2.values
    return psi


def assemble_stationary(mode: EigenMode, a1: complex, a2: complex | None, g: ZonalProfile,
                        ) -> StreamFunctionField:
    """``psi = g + a1 y1 exp(i m phi) + a2 y2 exp(-i m phi)``.

    ``a2 = None`` selects ``conj(a1)``, which gives a real field.
    """
    _check_mode(mode, g)
    if a2 is None:
        a2 = np.conj(a1)
    return _field(mode, complex(a1), complex(a2), g.values)


def stationary_residual(psi: StreamFunctionField, geom: EllipsoidGeometry,
                        backend: str = "spectral", fd_order: int = 6,
                        nphi: int | None = None) -> float:
    """Sup over interior nodes of ``(1/w)|-psi_theta q_phi + psi_phi q_theta|``."""
    if psi.mmax == 0 or not np.any(np.delete(psi.coeffs, psi.mmax, axis=0)):
        return 0.0
    nphi = nphi or 2 * dealiased_nphi(psi.mmax)
    q = absolute_vorticity(psi, geom, backend, fd_order)
    J = jacobian_physical(psi.coeffs, q, psi.mmax, psi.grid, geom, nphi, backend, fd_order)
    return float(np.max(np.abs(J)))


@dataclass
class TravelingWaveSolution:
    """``psi_c = g + c lam f + Y(phi - c t, theta)``."""

    geom: EllipsoidGeometry
    mode: EigenMode
    a1: complex
    a2: complex
    g: ZonalProfile
    f: ZonalProfile
    c: float

    @property
    def lam(self) -> float:
        return self.mode.lam

    @property
    def zonal(self) -> np.ndarray:
        if self.c == 0.0:
            return self.g.values.copy()
        return self.g.values + self.c * self.lam * self.f.values

    def field(self, t: float = 0.0) -> StreamFunctionField:
        return _field(self.mode, self.a1, self.a2, self.zonal, self.c * t)

    def velocity_zonal_derivative(self) -> np.ndarray | None:
        if self.g.dvalues is None or self.f.dvalues is None:
            return None
        return self.g.dvalues + self.c * self.lam * self.f.dvalues


def assemble_traveling(mode: EigenMode, a1: complex, a2: complex | None, g: ZonalProfile,
                       f: ZonalProfile, c: float, geom: EllipsoidGeometry | None = None
                       ) -> TravelingWaveSolution:
    """Traveling solution with speed ``c``; ``geom`` defaults to the mode's surface."""
    _check_mode(mode, g, f)
    if a2 is None:
        a2 = np.conj(a1)
    geom = geom or mode.geom
    if geom is None:
        raise ValueError("geometry unknown: pass geom or use a mode from solve_modes")
    return TravelingWaveSolution(geom, mode, complex(a1), complex(a2), g, f, float(c))


def unsteady_residual(tw: TravelingWaveSolution, t: float, backend: str = "spectral",
                      fd_order: int = 6, nphi: int | None = None) -> float:
    """Sup of ``|d_t q + (1/w)[-psi_theta q_phi + psi_phi q_theta]|`` over interior nodes.

    The time derivative is exact: each ``m`` coefficient rotates as
    ``exp(-i m c t)``.
    """
    psi = tw.field(t)
    geom = tw.geom
    q = absolute_vorticity(psi, geom, backend, fd_order)
    nphi = nphi or 2 * dealiased_nphi(max(psi.mmax, 1))
    dq = -1j * tw.c * psi.wavenumbers[:, None] * q
    J = jacobian_physical(psi.coeffs, q, psi.mmax, psi.grid, geom, nphi, backend, fd_order)
    dqp = synthesize(dq[:, 1:-1], psi.mmax, nphi)[1]
    return float(np.max(np.abs(dqp + J)))


def sphere_zonal_coefficient(lam: float, omega: float, c: float) -> float:
    """Coefficient of ``sin(theta)`` in the zonal part of the sphere solution."""
    return (2.0 * omega + lam * c) / (2.0 - lam)


def solve_traveling(geom: EllipsoidGeometry, l: int, m: int, c: float, grid: ThetaGrid,
                    a1: complex = 1.0, a2: complex | None = None, degree: int = 5
                    ) -> TravelingWaveSolution:
    """Eigenmode, zonal profiles and assembly for one ``(l, m)`` in a single call."""
    mode = solve_modes(geom, m, l, grid)[-1]
    g, _ = solve_g(mode.lam, geom, grid, degree)
    f = solve_f(mode.lam, geom, grid, degree)
    return assemble_traveling(mode, a1, a2, g, f, c, geom)
