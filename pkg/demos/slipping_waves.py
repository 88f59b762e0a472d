"""Two traveling waves that start close together drift apart in phase."""

from ellipsoid_rh.geometry import EllipsoidGeometry, ThetaGrid
from ellipsoid_rh.instability import build_experiment, lower_bound, sup_distance
from ellipsoid_rh.waves import solve_traveling

base = solve_traveling(EllipsoidGeometry(0.9, 1.0), 2, 1, 0.3, ThetaGrid(128))
print(f"{'n':>5} {'initial':>10} {'sup dist^2':>11} {'bound':>8} {'t*':>10}")
for n in (1, 2, 5, 10, 100):
    exp = build_experiment(base, n)
    d0 = exp.distance_sq_fields(0.0) ** 0.5
    print(f"{n:5d} {d0:10.3e} {sup_distance(exp):11.6f} {lower_bound(exp):8.4f} {exp.t_star:10.2f}")
