"""Build a stationary wave on an oblate ellipsoid and report how well it solves the flow equation."""

import numpy as np

from ellipsoid_rh.geometry import EllipsoidGeometry, ThetaGrid
from ellipsoid_rh.spectral import solve_modes
from ellipsoid_rh.waves import assemble_stationary, solve_g, stationary_residual

geom = EllipsoidGeometry(0.9, 1.0)
for n in (64, 128, 256):
    grid = ThetaGrid(n)
    mode = solve_modes(geom, 1, 2, grid)[-1]
    g, C = solve_g(mode.lam, geom, grid)
    psi = assemble_stationary(mode, 1.0, None, g)
    res = stationary_residual(psi, geom, "fd", 6)
    print(f"n={n:4d}  lambda={mode.lam:.12f}  C={C:.10f}  fd6 residual={res:.3e}")

print("g at the equator:", g.values[np.argmin(np.abs(grid.nodes))])
