"""Pseudo-spectral time integration of the barotropic vorticity equation.

The prognostic variable is the relative vorticity ``zeta = Delta psi`` stored
as longitude Fourier coefficients. Each step inverts the Laplacian mode by
mode (dense LU factorizations computed once), forms the dealiased Jacobian
bracket with the absolute vorticity ``q = zeta + coriolis`` and advances

    d zeta / dt = -(1/w) [-psi_theta q_phi + psi_phi q_theta]

with the classical four-stage Runge-Kutta scheme at a fixed step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import BlowUp, CFLViolation, ModeAbsent, NonzeroMean
from .fields import (
    StreamFunctionField,
    jacobian_coeffs,
    laplacian_coeffs,
    synthesize,
    velocity,
)
from .geometry import EllipsoidGeometry, ThetaGrid, differentiation_matrix


class PoissonSolver:
    """Mode-by-mode inverse of the Laplace-Beltrami operator on ``grid``.

    For ``m != 0`` the pole values are pinned to zero. For ``m = 0`` the
    operator annihilates constants, so the system is bordered with the
    zero-mean condition ``int psi dsigma = 0``.
    """

    def __init__(self, geom: EllipsoidGeometry, grid: ThetaGrid, mmax: int,
                 backend: str = "spectral", fd_order: int = 6, mean_tol: float = 1e-8):
        self.geom, self.grid, self.mmax = geom, grid, mmax
        self.backend, self.fd_order = backend, fd_order
        self.mean_tol = mean_tol
        self.weights = grid.area_quadrature(geom)
        inner = slice(1, grid.n)
        r = grid.rho(geom)[inner]
        c = grid.cos[inner]
        tan = grid.sin[inner] / c
        self._lu = {}
        for am in range(mmax + 1):
            par = 1 if am % 2 == 0 else -1
            D1 = differentiation_matrix(grid, par, 1, backend, fd_order)
            D2 = differentiation_matrix(grid, par, 2, backend, fd_order)
            L = np.zeros((grid.size, grid.size))
            L[inner] = (-(tan / r ** 4))[:, None] * D1[inner] + (1.0 / r ** 2)[:, None] * D2[inner]
            L[inner, inner] -= np.diag(am * am / c ** 2)
            if am == 0:
                L[0] = 2.0 * D2[0]
                L[-1] = 2.0 * D2[-1]
                big = np.zeros((grid.size + 1, grid.size + 1))
                big[:-1, :-1] = L
                big[:-1, -1] = self.weights
                big[-1, :-1] = self.weights
                self._lu[am] = linalg.lu_factor(big)
            else:
                L[0] = 0.0
                L[-1] = 0.0
                L[0, 0] = L[-1, -1] = 1.0
                self._lu[am] = linalg.lu_factor(L)

    def mean(self, zeta0: np.ndarray) -> complex:
        return complex(np.sum(self.weights * zeta0) / np.sum(self.weights))

    def solve(self, zeta: np.ndarray) -> np.ndarray:
        mmax = self.mmax
        out = np.zeros_like(zeta, dtype=complex)
        scale = max(1.0, float(np.max(np.abs(zeta), initial=0.0)))
        mean = self.mean(zeta[mmax])
        if abs(mean) > self.mean_tol * scale:
            raise NonzeroMean(f"surface mean of the vorticity is {abs(mean):.3e}")
        for k, m in enumerate(range(-mmax, mmax + 1)):
            rhs = np.array(zeta[k], dtype=complex)
            if m == 0:
                rhs = np.append(rhs, 0.0)
                out[k] = linalg.lu_solve(self._lu[0], rhs)[:-1]
            else:
                rhs[0] = rhs[-1] = 0.0
                out[k] = linalg.lu_solve(self._lu[abs(m)], rhs)
        return out


def poisson_solve(zeta, geom: EllipsoidGeometry, grid: ThetaGrid | None = None,
                  backend: str = "spectral", fd_order: int = 6) -> StreamFunctionField:
    """``psi`` with ``Delta psi = zeta`` and zero surface mean.

    ``zeta`` is a :class:`StreamFunctionField` or a coefficient array.
    """
    if isinstance(zeta, StreamFunctionField):
        grid, coeffs, mmax = zeta.grid, zeta.coeffs, zeta.mmax
    else:
        coeffs = np.asarray(zeta, dtype=complex)
        mmax = (coeffs.shape[0] - 1) // 2
    solver = PoissonSolver(geom, grid, mmax, backend, fd_order)
    return StreamFunctionField(grid, mmax, solver.solve(coeffs))


@dataclass
class VorticityState:
    t: float
    zeta: np.ndarray = field(repr=False)
    psi: StreamFunctionField = field(repr=False)
    energy: float = 0.0
    enstrophy: float = 0.0

    @property
    def q(self) -> np.ndarray:
        return self.zeta


@dataclass
class Trajectory:
    states: list
    geom: EllipsoidGeometry
    dt: float

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def energy(self) -> np.ndarray:
        return np.array([s.energy for s in self.states])

    @property
    def enstrophy(self) -> np.ndarray:
        return np.array([s.enstrophy for s in self.states])

    def __len__(self):
        return len(self.states)

    def __getitem__(self, k):
        return self.states[k]


class Evolver:
    """Fixed-step RK4 integrator for one grid, bandwidth and derivative backend."""

    def __init__(self, geom: EllipsoidGeometry, grid: ThetaGrid, mmax: int,
                 backend: str = "spectral", fd_order: int = 6, filter_order: int | None = None):
        self.geom, self.grid, self.mmax = geom, grid, mmax
        self.backend, self.fd_order = backend, fd_order
        self.poisson = PoissonSolver(geom, grid, mmax, backend, fd_order)
        self.cor = 2.0 * geom.omega * grid.sin / grid.rho(geom)
        self.weights = grid.area_quadrature(geom)
        self.filter = None
        if filter_order:
            m = np.arange(-mmax, mmax + 1)
            self.filter = np.exp(-36.0 * (np.abs(m) / max(mmax, 1)) ** filter_order)[:, None]

    def vorticity(self, psi: StreamFunctionField) -> np.ndarray:
        return laplacian_coeffs(psi.with_mmax(self.mmax).coeffs, self.mmax, self.grid,
                                self.geom, self.backend, self.fd_order)

    def tendency(self, zeta: np.ndarray) -> np.ndarray:
        psi = self.poisson.solve(zeta)
        q = zeta.copy()
        q[self.mmax] = q[self.mmax] + self.cor
        out = -jacobian_coeffs(psi, q, self.mmax, self.grid, self.geom, self.backend,
                               self.fd_order)
        # the exact bracket integrates to zero over the surface; remove the discrete residue
        out[self.mmax] -= np.sum(self.weights * out[self.mmax]) / np.sum(self.weights)
        return out

    def step(self, zeta: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.tendency(zeta)
        k2 = self.tendency(zeta + 0.5 * dt * k1)
        k3 = self.tendency(zeta + 0.5 * dt * k2)
        k4 = self.tendency(zeta + dt * k3)
        out = zeta + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if self.filter is not None:
            out = out * self.filter
        return out

    def invariants(self, zeta: np.ndarray, psi: np.ndarray) -> tuple[float, float]:
        """Kinetic energy ``-1/2 int psi zeta`` and enstrophy ``int q^2`` (Parseval)."""
        q = zeta.copy()
        q[self.mmax] = q[self.mmax] + self.cor
        e = -0.5 * 2.0 * math.pi * float(np.sum(self.weights * np.real(psi * np.conj(zeta))))
        z = 2.0 * math.pi * float(np.sum(self.weights * np.abs(q) ** 2))
        return e, z

    def _speeds(self, psi: StreamFunctionField):
        ue, un = velocity(psi, self.geom, self.backend, self.fd_order)
        nphi = 4 * psi.mmax + 4
        _, e = synthesize(ue, psi.mmax, nphi)
        _, n = synthesize(un, psi.mmax, nphi)
        return np.abs(e), np.abs(n)

    def max_speed(self, psi: StreamFunctionField) -> float:
        e, n = self._speeds(psi)
        return float(np.max(np.hypot(e, n)))

    def stable_dt(self, psi: StreamFunctionField, safety: float = 0.5) -> float:
        """Largest step allowed by the local advective CFL condition.

        The zonal spacing ``cos(theta) dphi`` with ``dphi = 2 pi / (2 mmax + 1)``
        and the meridional spacing ``rho h`` are compared with the local
        velocity components at every node.
        """
        e, n = self._speeds(psi)
        dphi = 2.0 * math.pi / (2 * self.mmax + 1)
        inner = slice(1, self.grid.n)
        rate = (e[:, inner] / (self.grid.cos[inner] * dphi)
                + n[:, inner] / (self.grid.rho(self.geom)[inner] * self.grid.h))
        peak = float(np.max(rate))
        return math.inf if peak == 0.0 else safety / peak

    def run(self, psi0: StreamFunctionField, dt: float, T: float, save_every: int = 1,
            safety: float = 0.5, blowup: float = 1e3, check_cfl: bool = True) -> Trajectory:
        psi0 = psi0.with_mmax(self.mmax)
        if check_cfl and dt > self.stable_dt(psi0, safety):
            raise CFLViolation(f"dt = {dt:g} exceeds the stable step {self.stable_dt(psi0, safety):.3g}")
        nsteps = int(round(T / dt))
        if nsteps < 0 or abs(nsteps * dt - T) > 1e-9 * max(1.0, abs(T)):
            raise ValueError("T must be a non-negative multiple of dt")
        zeta = self.vorticity(psi0)
        zmax0 = max(float(np.max(np.abs(zeta))), 1e-300)
        states = [self._state(0.0, zeta)]
        for k in range(1, nsteps + 1):
            zeta = self.step(zeta, dt)
            zmax = float(np.max(np.abs(zeta)))
            if not np.isfinite(zmax) or zmax > blowup * zmax0:
                raise BlowUp(f"vorticity grew to {zmax:.3e} at t = {k * dt:g}")
            if k % save_every == 0 or k == nsteps:
                states.append(self._state(k * dt, zeta))
        return Trajectory(states, self.geom, dt)

    def _state(self, t, zeta):
        psi = self.poisson.solve(zeta)
        e, z = self.invariants(zeta, psi)
        return VorticityState(t, zeta.copy(), StreamFunctionField(self.grid, self.mmax, psi), e, z)


def evolve(psi0: StreamFunctionField, dt: float, T: float, geom: EllipsoidGeometry,
           mmax: int | None = None, backend: str = "spectral", fd_order: int = 6,
           save_every: int = 1, safety: float = 0.5, filter_order: int | None = None
           ) -> Trajectory:
    """Integrate from ``psi0`` to time ``T``; ``mmax`` defaults to four times the input bandwidth."""
    mmax = mmax if mmax is not None else max(4 * psi0.mmax, 2)
    ev = Evolver(geom, psi0.grid, mmax, backend, fd_order, filter_order)
    return ev.run(psi0, dt, T, save_every, safety)


def measure_phase_speed(trajectory, m: int, times=None) -> float:
    """Angular phase speed of wavenumber ``m`` from the unwrapped coefficient phase.

    ``trajectory`` is a :class:`Trajectory` or a sequence of
    :class:`StreamFunctionField` together with ``times``.
    """
    if isinstance(trajectory, Trajectory):
        fields = [s.psi for s in trajectory.states]
        times = trajectory.times
    else:
        fields = list(trajectory)
        times = np.asarray(times, dtype=float)
    if m == 0:
        raise ModeAbsent("the zonal mode has no phase")
    coeffs = np.array([f.mode(m) for f in fields])
    k = int(np.argmax(np.abs(coeffs[0])))
    series = coeffs[:, k]
    if np.min(np.abs(series)) < 1e-6:
        raise ModeAbsent(f"|coeff_{m}| drops below 1e-6")
    phase = np.unwrap(np.angle(series))
    slope = np.polyfit(times, phase, 1)[0]
    return float(slope / (-m))


def l2_drift(a: StreamFunctionField, b: StreamFunctionField, geom: EllipsoidGeometry) -> float:
    """``||a - b||_{L2(dsigma)}`` for fields with possibly different bandwidths."""
    mmax = max(a.mmax, b.mmax)
    d = a.with_mmax(mmax).coeffs - b.with_mmax(mmax).coeffs
    q = a.grid.area_quadrature(geom)
    return math.sqrt(2.0 * math.pi * float(np.sum(q * np.abs(d) ** 2)))
