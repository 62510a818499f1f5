"""Particles that explode are removed instead of restarted.

At a = 0.5 < a* the surviving fraction drops and then sits on a long plateau.
The demo prints the plateau value alpha and compares a with (3/4) alpha^(1/3)
and with (3/4) alpha^(2/3), the value of a* for a system of alpha N particles
at the original interaction strength.

    python demos/kill_mode.py [t_end]
"""
import sys

import numpy as np

from rmnc.model import CubicModel
from rmnc.simulate import SimConfig, run_eigen_sde

t_end = float(sys.argv[1]) if len(sys.argv) > 1 else 200.0
N, a = 100, 0.5
cfg = SimConfig(N=N, model=CubicModel(a), dt=1e-3, t_end=t_end, burn_in=0.0, seed=1,
                mode="kill", alive_every=1000)
_, _, s = run_eigen_sde(cfg)
for t, n in s.alive_series[:: max(1, len(s.alive_series) // 12)]:
    print(f"t = {t:6.1f}  alive = {n}")
plateau = np.array([n for t, n in s.alive_series if t >= t_end / 2], dtype=float)
alpha = plateau.mean() / N
print(f"plateau alpha = {alpha:.3f} (spread {plateau.max() - plateau.min():g} particles)")
print(f"(3/4) alpha^(1/3) = {0.75 * alpha ** (1 / 3):.3f},  (3/4) alpha^(2/3) = {0.75 * alpha ** (2 / 3):.3f},  a = {a}")
