"""Relaxation of the Stieltjes transform from a point mass.

Starting from all eigenvalues at 0 (G = -1/z), the transform is transported
along characteristics and converges to the stationary transform G_a. The sup
distance over a set of targets decays roughly geometrically until it reaches
the round-off floor.

    python demos/burgers_relaxation.py [T]
"""
import sys
import warnings

from rmnc.dynamics import DEFAULT_TARGETS, delta_initial, evolve_G_series, sup_distance
from rmnc.equilibrium import G, stationary
from rmnc.model import CubicModel

T = float(sys.argv[1]) if len(sys.argv) > 1 else 30.0
m = CubicModel(0.0)
sol = stationary(m)
times = [0.0] + [float(t) for t in range(1, int(T) + 1)]
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    ev = evolve_G_series(delta_initial, m, DEFAULT_TARGETS, times)
for f in ev.fields[:: max(1, len(times) // 15)]:
    print(f"t = {f.time:5.1f}   sup |G - G_a| = {sup_distance(f, lambda z: G(sol, z)):.3e}")
