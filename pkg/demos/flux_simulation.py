"""Finite-N eigenvalue dynamics with restarts, and the stationary flux.

Runs the eigenvalue SDE for N particles in the cubic potential at a = 0, where
every eigenvalue eventually escapes to -infinity and re-enters from +infinity.
The net number of right-to-left crossings per unit time of any level should
approach (N/pi) Im J_0, independent of the level.

    python demos/flux_simulation.py [t_end] [N]
"""
import math
import sys

from rmnc.analysis import l1_distance, tail_fit
from rmnc.equilibrium import density_spec, stationary
from rmnc.model import CubicModel
from rmnc.simulate import SimConfig, run_eigen_sde

t_end = float(sys.argv[1]) if len(sys.argv) > 1 else 30.0
N = int(sys.argv[2]) if len(sys.argv) > 2 else 50

m = CubicModel(0.0)
sol = stationary(m)
cfg = SimConfig(N=N, model=m, dt=1e-3, t_end=t_end, burn_in=min(10.0, t_end / 3), seed=1,
                flux_levels=(-2.0, 0.0, 2.0, 10.0))
hist, flux, state = run_eigen_sde(cfg)

ref = N * sol.J.imag / math.pi
print(f"N = {N}, t_end = {t_end:g}: {state.explosions} explosions, {state.forced_sorts} forced re-orderings")
print(f"reference rate (N/pi) Im J_0 = {ref:.4f}")
for r in flux:
    print(f"  level {r.level:>5g}: {r.signed_crossings:5d} crossings over {r.t_hi - r.t_lo:g} -> rate {r.rate:.4f}")
print(f"L1 distance to the stationary density: {l1_distance(hist, density_spec(sol)):.4f}")
fit = tail_fit(hist, x_min=3.0)
if fit.applicable:
    print(f"tail fit: exponent {fit.exponent:.3f} +- {fit.exponent_stderr:.3f}, "
          f"C (fixed -2) = {fit.coefficient_fixed:.4f} vs Im J/pi = {sol.J.imag / math.pi:.4f}")
