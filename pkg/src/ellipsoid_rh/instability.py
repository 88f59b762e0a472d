"""Separation of nearby traveling waves with slightly different speeds.

Adding ``f / n`` to the zonal part of a traveling solution with speed ``c``
gives another exact solution whose speed is ``c_n = c + 1/(n lam)``. The two
start ``||f|| / n`` apart in ``L2(dsigma)``, but the wave components slip
against each other, and after half a slip period their phases are opposite.
By orthogonality of the Fourier modes the squared distance is exactly

    ||f||^2 / n^2 + |1 - exp(i m (c_n - c) t)|^2 (|a1|^2 ||y1||^2 + |a2|^2 ||y2||^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePerturbation, GridMismatch, PeriodNotCovered
from .evolver import Evolver
from .fields import StreamFunctionField
from .geometry import EllipsoidGeometry
from .waves import TravelingWaveSolution


def l2_distance(psiA: StreamFunctionField, psiB: StreamFunctionField,
                geom: EllipsoidGeometry) -> float:
    """``||A - B||`` in ``L2(dsigma)`` via Parseval in longitude."""
    if psiA.grid.n != psiB.grid.n or psiA.mmax != psiB.mmax:
        raise GridMismatch("fields live on different grids or bandwidths")
    d = psiA.coeffs - psiB.coeffs
    q = psiA.grid.area_quadrature(geom)
    return math.sqrt(2.0 * math.pi * float(np.sum(q * np.abs(d) ** 2)))


def _norm_sq(values, tw: TravelingWaveSolution) -> float:
    q = values.grid.area_quadrature(tw.geom)
    return 2.0 * math.pi * float(np.sum(q * values.values ** 2))


@dataclass
class PerturbationExperiment:
    base: TravelingWaveSolution
    n: int
    perturbed: TravelingWaveSolution

    @property
    def m(self) -> int:
        return abs(self.base.mode.m)

    @property
    def c(self) -> float:
        return self.base.c

    @property
    def c_n(self) -> float:
        return self.perturbed.c

    @property
    def f_norm_sq(self) -> float:
        return _norm_sq(self.base.f, self.base)

    @property
    def slip_period(self) -> float:
        """``2 pi / (m |c_n - c|)``; infinite for a zonal base."""
        if self.m == 0 or self.mode_energy() == 0.0:
            return math.inf
        return 2.0 * math.pi / (self.m * abs(self.c_n - self.c))

    @property
    def t_star(self) -> float:
        """First time at which the two wave components are in antiphase."""
        return 0.5 * self.slip_period

    def mode_energy(self) -> float:
        return (abs(self.base.a1) ** 2 * _norm_sq(self.base.mode.y1, self.base)
                + abs(self.base.a2) ** 2 * _norm_sq(self.base.mode.y2, self.base)
                if self.m else 0.0)

    def distance_sq(self, t) -> np.ndarray:
        """Closed-form squared distance at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        slip = np.abs(1.0 - np.exp(1j * self.m * (self.c_n - self.c) * t)) ** 2
        return self.f_norm_sq / self.n ** 2 + slip * self.mode_energy()

    def distance_sq_fields(self, t: float) -> float:
        """Squared distance computed from the two assembled fields."""
        return l2_distance(self.perturbed.field(t), self.base.field(t), self.base.geom) ** 2


def build_experiment(base: TravelingWaveSolution, n: int) -> PerturbationExperiment:
    """Perturbed solution ``g + (c lam + 1/n) f + Y(phi - c_n t)`` with ``c_n = c + 1/(n lam)``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    c_n = base.c + 1.0 / (n * base.lam)
    pert = TravelingWaveSolution(base.geom, base.mode, base.a1, base.a2, base.g, base.f, c_n)
    return PerturbationExperiment(base, int(n), pert)


def default_tgrid(exp: PerturbationExperiment, samples: int = 512) -> np.ndarray:
    """``samples`` uniform times over one slip period plus the antiphase time."""
    T = exp.slip_period
    if not math.isfinite(T):
        T = 1.0
    t = np.linspace(0.0, T, samples)
    if math.isfinite(exp.t_star):
        t = np.sort(np.append(t, exp.t_star))
    return t


def sup_distance(exp: PerturbationExperiment, tgrid=None) -> float:
    """Maximum of the squared field distance over ``tgrid``."""
    tgrid = default_tgrid(exp) if tgrid is None else np.asarray(tgrid, dtype=float)
    span = float(np.max(tgrid) - np.min(tgrid)) if tgrid.size else 0.0
    if math.isfinite(exp.slip_period) and span < exp.slip_period * (1.0 - 1e-12):
        raise PeriodNotCovered(f"time grid spans {span:.6g} < slip period {exp.slip_period:.6g}")
    return max(exp.distance_sq_fields(t) for t in tgrid)


def lower_bound(exp: PerturbationExperiment) -> float:
    """``8 pi |a1|^2 int y1^2 w - ||f||^2 / n`` (with ``a2`` in place of a vanishing ``a1``)."""
    a1, a2 = exp.base.a1, exp.base.a2
    if a1 == 0 and a2 == 0:
        raise DegeneratePerturbation("a1 = a2 = 0: the base wave is zonal")
    a, y = (a1, exp.base.mode.y1) if a1 != 0 else (a2, exp.base.mode.y2)
    return 4.0 * abs(a) ** 2 * _norm_sq(y, exp.base) - exp.f_norm_sq / exp.n


def two_term_value(exp: PerturbationExperiment) -> float:
    """Exact supremum over a slip period: ``4 (|a1|^2 ||y1||^2 + |a2|^2 ||y2||^2) + ||f||^2/n^2``."""
    return 4.0 * exp.mode_energy() + exp.f_norm_sq / exp.n ** 2


def asymptotic_threshold(exp: PerturbationExperiment) -> int:
    """Smallest ``N`` such that the one-term bound exceeds half its limit for ``n >= N``."""
    a1 = exp.base.a1 if exp.base.a1 != 0 else exp.base.a2
    half = 2.0 * abs(a1) ** 2 * _norm_sq(exp.base.mode.y1, exp.base)
    if half == 0.0:
        raise DegeneratePerturbation("a1 = a2 = 0: the base wave is zonal")
    return max(1, math.ceil(exp.f_norm_sq / half))


@dataclass
class EvolvedReport:
    times: np.ndarray
    observed: np.ndarray
    analytic: np.ndarray
    max_observed: float
    max_analytic: float
    relative_error: float
    T: float
    capped: bool


def evolved_instability_check(exp: PerturbationExperiment, dt: float, T: float | None = None,
                              T_cap: float = 20.0, mmax: int | None = None,
                              backend: str = "spectral", save_every: int = 10) -> EvolvedReport:
    """Integrate both initial states and compare their distance with the closed form.

    The window is one slip period capped at ``T_cap``; ``capped`` records
    whether the cap was active.
    """
    full = exp.slip_period if math.isfinite(exp.slip_period) else T_cap
    T = min(full, T_cap) if T is None else T
    capped = T < full
    nsteps = max(1, int(math.ceil(T / dt)))
    dt = T / nsteps
    geom = exp.base.geom
    a0 = exp.base.field(0.0)
    b0 = exp.perturbed.field(0.0)
    mmax = mmax if mmax is not None else max(4 * a0.mmax, 2)
    ev = Evolver(geom, a0.grid, mmax, backend)
    ta = ev.run(a0, dt, T, save_every, check_cfl=False)
    tb = ev.run(b0, dt, T, save_every, check_cfl=False)
    times = ta.times
    obs = np.array([l2_distance(sa.psi, sb.psi, geom) ** 2 for sa, sb in zip(ta.states, tb.states)])
    ana = exp.distance_sq(times)
    rel = float(np.max(np.abs(obs - ana)) / max(np.max(ana), 1e-300))
    return EvolvedReport(times, obs, ana, float(obs.max()), float(ana.max()), rel, T, capped)
