"""Metric quantities of the oblate biaxial ellipsoid and latitude grids.

The surface is parameterized by longitude ``phi`` and the (parametric)
latitude ``theta`` as ``(cos(phi) cos(theta), sin(phi) cos(theta), b sin(theta))``.
In this chart the metric is diagonal with ``g_phiphi = cos(theta)**2`` and
``g_thetatheta = rho(theta)**2`` where ``rho = sqrt(sin^2 + b^2 cos^2)``, so the
area element is ``dsigma = cos(theta) rho(theta) dphi dtheta``.

Latitude grids are uniform in ``theta`` and always contain both poles and the
equator. Derivatives in ``theta`` are taken on the periodic "doubled" circle:
a longitudinal Fourier coefficient of wavenumber ``m`` of any smooth field
satisfies ``psi_m(pi - theta) = (-1)**m psi_m(theta)``, which extends every
profile across both poles to a ``2 pi``-periodic function. On that circle we
offer a Fourier (``"spectral"``) backend and a centered finite-difference
(``"fd"``) backend.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import integrate

from .errors import GridTooCoarse, PoleSingularity

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class EllipsoidGeometry:
    """Oblate ellipsoid with unit equatorial radius, polar semi-axis ``b``
    and rotation rate ``omega``."""

    b: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        b = float(self.b)
        if not (0.0 < b <= 1.0) or not math.isfinite(b):
            raise ValueError(f"b out of range: {self.b!r} (need 0 < b <= 1)")
        if not math.isfinite(float(self.omega)):
            raise ValueError("omega must be finite")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def is_sphere(self) -> bool:
        return self.b == 1.0

    @property
    def eccentricity_sq(self) -> float:
        return 1.0 - self.b * self.b


def rho(theta, geom: EllipsoidGeometry):
    """``sqrt(sin^2 theta + b^2 cos^2 theta)``; lies in ``[b, 1]``."""
    s = np.sin(theta)
    c = np.cos(theta)
    return np.sqrt(s * s + geom.b * geom.b * c * c)


def area_weight(theta, geom: EllipsoidGeometry):
    """Area density ``w = cos(theta) rho(theta)``, exactly zero at the poles."""
    theta = np.asarray(theta, dtype=float)
    w = np.cos(theta) * rho(theta, geom)
    w = np.where(np.abs(np.abs(theta) - HALF_PI) == 0.0, 0.0, w)
    return w if w.ndim else float(w)


def coriolis(theta, geom: EllipsoidGeometry):
    """Planetary vorticity ``2 omega sin(theta) / rho(theta)`` (odd in theta)."""
    out = 2.0 * geom.omega * np.sin(theta) / rho(theta, geom)
    return out if np.ndim(out) else float(out)


def zone_area(theta, geom: EllipsoidGeometry):
    """Closed form of ``int_{-pi/2}^{theta} w(s) ds``.

    With ``x = sin(s)`` the integrand becomes ``sqrt(b^2 + e^2 x^2)`` with
    ``e^2 = 1 - b^2``, which has an elementary antiderivative.
    """
    return _area_antiderivative(np.sin(theta), geom) - _area_antiderivative(-1.0, geom)


def _area_antiderivative(x, geom: EllipsoidGeometry):
    b = geom.b
    e = math.sqrt(geom.eccentricity_sq)
    x = np.asarray(x, dtype=float)
    root = np.sqrt(b * b + e * e * x * x)
    if e < 1e-8:
        # asinh(z)/z -> 1 - z^2/6 as z -> 0
        z = e * x / b
        ratio = 1.0 - z * z / 6.0
    else:
        z = e * x / b
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(z == 0.0, 1.0, np.arcsinh(z) / np.where(z == 0.0, 1.0, z))
    out = 0.5 * x * root + 0.5 * b * x * ratio
    return out if out.ndim else float(out)


# --- the primitive F with F(0) = 0 and F' = rho / cos ---------------------------------
#
# F' = 1/cos - e^2 cos / (1 + rho); the first term integrates to atanh(sin x) and
# the second is smooth on the closed interval.


def _remainder_integrand(t, geom):
    c = np.cos(t)
    return c / (1.0 + rho(t, geom))


@lru_cache(maxsize=32)
def _remainder_series(b: float):
    geom = EllipsoidGeometry(b, 0.0)
    deg = 32
    while True:
        series = cheb.Chebyshev.interpolate(
            lambda t: _remainder_integrand(t, geom), deg, domain=[-HALF_PI, HALF_PI])
        tail = np.max(np.abs(series.coef[-4:]))
        if tail < 1e-16 * np.max(np.abs(series.coef)) or deg >= 8192:
            break
        deg *= 2
    prim = series.integ(lbnd=0.0)
    return prim


def F_primitive(x: float, geom: EllipsoidGeometry) -> float:
    """``F(x) = int_0^x rho(t)/cos(t) dt`` by adaptive quadrature.

    The ``1/cos`` singularity is integrated in closed form (``atanh(sin x)``);
    the bounded remainder ``-(1 - b^2) cos/(1 + rho)`` goes through
    :func:`scipy.integrate.quad`.
    """
    x = float(x)
    if x <= -HALF_PI or x >= HALF_PI:
        raise PoleSingularity(f"F diverges at the pole (x = {x!r})")
    e2 = geom.eccentricity_sq
    rem = 0.0
    if e2 != 0.0 and x != 0.0:
        rem, _ = integrate.quad(_remainder_integrand, 0.0, x, args=(geom,),
                                epsabs=1e-14, epsrel=1e-13, limit=200)
    return float(np.arctanh(math.sin(x)) - e2 * rem)


def F_values(theta, geom: EllipsoidGeometry) -> np.ndarray:
    """Vectorized F on open-interval points (Chebyshev antiderivative of the remainder)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) >= HALF_PI):
        raise PoleSingularity("F diverges at the poles")
    # atanh(sin t) = log(tan((t + pi/2)/2)), written via the distance to the nearer pole
    south = np.log(np.tan(0.5 * (theta + HALF_PI)))
    north = -np.log(np.tan(0.5 * (HALF_PI - theta)))
    out = np.where(theta < 0.0, south, north)
    if geom.eccentricity_sq != 0.0:
        out = out - geom.eccentricity_sq * _remainder_series(geom.b)(theta)
    return out


def F_minus_log(theta, geom: EllipsoidGeometry) -> np.ndarray:
    """Smooth part ``F(theta) - log(theta + pi/2)`` for theta near the south pole."""
    theta = np.asarray(theta, dtype=float)
    d = theta + HALF_PI
    out = np.log(np.tan(0.5 * d) / d)
    if geom.eccentricity_sq != 0.0:
        out = out - geom.eccentricity_sq * _remainder_series(geom.b)(theta)
    return out


# --- grids and profiles ---------------------------------------------------------------


@dataclass(frozen=True)
class ThetaGrid:
    """Uniform latitude grid with ``n`` intervals (``n + 1`` nodes) on ``[-pi/2, pi/2]``.

    ``n`` must be even so that the equator is a node and the node set is
    closed under ``theta -> -theta``.
    """

    n: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n % 2:
            raise GridTooCoarse(f"need an even number of intervals >= 8, got {self.n}")
        object.__setattr__(self, "n", n)
        nodes = -HALF_PI + np.arange(n + 1) * (math.pi / n)
        nodes[n // 2] = 0.0
        nodes[0], nodes[-1] = -HALF_PI, HALF_PI
        # exact symmetry
        nodes[n // 2 + 1:] = -nodes[n // 2 - 1::-1]
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return math.pi / self.n

    @property
    def cos(self) -> np.ndarray:
        """``cos`` of the nodes, computed from the pole distance to keep relative accuracy."""
        k = np.minimum(np.arange(self.n + 1), self.n - np.arange(self.n + 1))
        return np.sin(k * self.h)

    @property
    def sin(self) -> np.ndarray:
        k = np.arange(self.n + 1)
        out = -np.cos(k * self.h)
        half = self.n // 2
        out[half + 1:] = -out[half - 1::-1]
        out[half] = 0.0
        return out

    def rho(self, geom: "EllipsoidGeometry") -> np.ndarray:
        s, c = self.sin, self.cos
        return np.sqrt(s * s + geom.b * geom.b * c * c)

    @property
    def size(self) -> int:
        return self.n + 1

    @property
    def equator(self) -> int:
        return self.n // 2

    @property
    def left(self) -> np.ndarray:
        """Nodes on the southern half ``[-pi/2, 0]``."""
        return self.nodes[: self.n // 2 + 1]

    @property
    def interior(self) -> slice:
        return slice(1, self.n)

    def area_quadrature(self, geom: EllipsoidGeometry) -> np.ndarray:
        """Weights ``q`` with ``sum(q * f) ~ int f(theta) w(theta) dtheta``.

        Uniform nodes in theta are Chebyshev-Lobatto nodes in ``x = sin(theta)``
        and ``w dtheta = rho dx``, so Clenshaw-Curtis weights times ``rho`` are
        spectrally accurate for smooth fields.
        """
        return _clenshaw_curtis(self.n) * self.rho(geom)


@lru_cache(maxsize=16)
def _clenshaw_curtis(n: int) -> np.ndarray:
    # Trefethen, Spectral Methods in MATLAB, clencurt.m (n even)
    k = np.arange(n + 1)
    t = math.pi * k / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    w[0] = w[n] = 1.0 / (n * n - 1)
    tt = t[1:n]
    for j in range(1, n // 2):
        v -= 2.0 * np.cos(2 * j * tt) / (4 * j * j - 1)
    v -= np.cos(n * tt) / (n * n - 1)
    w[1:n] = 2.0 * v / n
    w.setflags(write=False)
    return w


@dataclass
class ZonalProfile:
    """Samples of a latitude-only function.

    ``half=True`` marks a profile stored on the southern half grid
    ``[-pi/2, 0]`` only. ``odd=True`` enforces exact antisymmetry on full grids.
    ``lam`` records the eigenvalue a profile was solved for, when relevant, and
    ``dvalues`` optionally carries the first derivative at the same nodes.
    """

    grid: ThetaGrid
    values: np.ndarray
    odd: bool = False
    half: bool = False
    lam: float | None = None
    dvalues: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = self.grid.n // 2 + 1 if self.half else self.grid.size
        if values.shape != (expected,):
            raise ValueError(f"expected {expected} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite")
        if self.odd and not self.half:
            values = 0.5 * (values - values[::-1])
            values[self.grid.equator] = 0.0
        self.values = values
        if self.dvalues is not None:
            d = np.array(self.dvalues, dtype=float)
            if d.shape != values.shape:
                raise ValueError("derivative samples must match the values")
            if self.odd and not self.half:
                d = 0.5 * (d + d[::-1])
            self.dvalues = d

    @property
    def theta(self) -> np.ndarray:
        return self.grid.left if self.half else self.grid.nodes

    def to_csv(self, column: str = "value", derivative: str | None = None) -> str:
        cols = {"theta": self.theta, column: self.values}
        if derivative is not None:
            if self.dvalues is None:
                raise ValueError("profile carries no derivative samples")
            cols[derivative] = self.dvalues
        return write_columns(cols)


def write_columns(columns: dict) -> str:
    """CSV text with 17 significant digits (IEEE double round trip)."""
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*data):
        writer.writerow([format(float(v), ".17g") for v in row])
    return buf.getvalue()


def read_columns(text: str) -> dict:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [[float(v) for v in r] for r in reader if r]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def profile_from_csv(text: str, grid: ThetaGrid, **kwargs) -> ZonalProfile:
    cols = read_columns(text)
    theta = cols.pop("theta")
    (values,) = cols.values()
    half = theta.size == grid.n // 2 + 1
    ref = grid.left if half else grid.nodes
    if theta.shape != ref.shape or np.max(np.abs(theta - ref)) > 1e-14:
        raise ValueError("CSV nodes do not match the grid")
    return ZonalProfile(grid, values, half=half, **kwargs)


# --- differentiation on the doubled circle ----------------------------------------


def _double(values: np.ndarray, parity) -> np.ndarray:
    parity = np.asarray(parity, dtype=float)
    if parity.ndim:
        parity = parity[..., None]
    return np.concatenate([values, parity * values[..., -2:0:-1]], axis=-1)


@lru_cache(maxsize=8)
def _central_weights(deriv: int, order: int) -> np.ndarray:
    half = (deriv + 1) // 2 + order // 2 - 1
    offsets = np.arange(-half, half + 1, dtype=float)
    npts = offsets.size
    A = np.vander(offsets, npts, increasing=True).T
    rhs = np.zeros(npts)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(A, rhs)


def theta_derivative(values, parity, grid: ThetaGrid, order: int = 1,
                     backend: str = "spectral", fd_order: int = 6) -> np.ndarray:
    """Derivative of order 1 or 2 along the last axis (grid nodes).

    ``parity`` is ``(-1)**m`` for a wavenumber-``m`` coefficient (broadcast
    over leading axes). Values at the poles are included.
    """
    values = np.asarray(values)
    if values.shape[-1] != grid.size:
        raise ValueError("last axis must match the grid")
    ext = _double(values, parity)
    n2 = ext.shape[-1]
    if backend == "spectral":
        k = np.fft.fftfreq(n2, 1.0 / n2)
        mult = (1j * k) ** order
        if order % 2:
            mult[n2 // 2] = 0.0
        out = np.fft.ifft(np.fft.fft(ext, axis=-1) * mult, axis=-1)
        if not np.iscomplexobj(values):
            out = out.real
    elif backend == "fd":
        if grid.n < 2 * fd_order:
            raise GridTooCoarse("finite-difference stencil wider than the grid")
        wts = _central_weights(order, fd_order)
        half = wts.size // 2
        out = np.zeros_like(ext)
        for j, c in enumerate(wts):
            if c != 0.0:
                out = out + c * np.roll(ext, half - j, axis=-1)
        out = out / grid.h ** order
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out[..., : grid.size]


def differentiation_matrix(grid: ThetaGrid, parity: int, order: int = 1,
                           backend: str = "spectral", fd_order: int = 6) -> np.ndarray:
    """Dense matrix of :func:`theta_derivative` acting on nodal values."""
    eye = np.eye(grid.size)
    return theta_derivative(eye, parity, grid, order, backend, fd_order).T


def one_sided_weights(offsets, deriv: int) -> np.ndarray:
    """Taylor weights of a ``deriv``-th derivative on arbitrary integer offsets."""
    offsets = np.asarray(offsets, dtype=float)
    V = np.vander(offsets, offsets.size, increasing=True).T
    rhs = np.zeros(offsets.size)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(V, rhs)


def pole_slope(values: np.ndarray, h: float, side: int, width: int = 7) -> float:
    """One-sided derivative at an end node (``side=-1`` south, ``+1`` north)."""
    offs = np.arange(width) if side < 0 else -np.arange(width)
    seq = values[:width] if side < 0 else values[::-1][:width]
    return float(one_sided_weights(offs, 1) @ seq / h)


def equator_curvature(half_values: np.ndarray, h: float, width: int = 8) -> float:
    """Backward second difference at the last node of a southern-half profile."""
    w = one_sided_weights(-np.arange(width), 2)
    return float(w @ half_values[::-1][:width] / h ** 2)
