"""Stationary densities across the phase transition of the cubic model.

Below a* = (3/4) beta^(2/3) the density has full support and C/x^2 tails; at
a* the lower edge vanishes like (x - lo)^(3/2); above a* the support is a
compact interval with square-root edges. The quartic model at g_c shows the
same 3/2 edge on both sides.

    python demos/phase_transition.py [outdir]
"""
import math
import sys
from pathlib import Path

import numpy as np

from rmnc.analysis import edge_exponent_fit
from rmnc.equilibrium import density, density_spec, flux_rate, stationary
from rmnc.model import CubicModel, QuarticModel, critical_a, critical_g
from rmnc.plot import svg_plot

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
out.mkdir(parents=True, exist_ok=True)

x = np.linspace(-3, 3, 1201)
series = []
for a in (0.0, critical_a(1.0), 1.5):
    sol = stationary(CubicModel(a))
    series.append({"x": x, "y": density(sol, x), "label": f"a = {a:g} ({sol.regime})"})
    line = f"a = {a:<5g} regime = {sol.regime:<13} J = {sol.J:.6f}  flux = {flux_rate(sol):.6f}"
    if sol.support is not None:
        line += f"  support = [{sol.support[0]:.6f}, {sol.support[1]:.6f}]"
    print(line)
svg_plot(series, out / "cubic_densities.svg", title="cubic model, beta = 1", xlabel="x", ylabel="rho")

sub = stationary(CubicModel(0.0))
C = flux_rate(sub)
xs = np.logspace(0.5, 3, 40)
svg_plot([{"x": xs, "y": xs**2 * density(sub, xs), "label": "x^2 rho(x)"},
          {"x": xs, "y": np.full_like(xs, C), "label": "Im J / pi"}],
         out / "cubic_tail.svg", title="heavy tail at a = 0", xlabel="x", ylabel="x^2 rho", logx=True)
print(f"x^2 rho(x) at x = 1e3: {1e6 * density(sub, 1e3):.6f}  vs Im J/pi = {C:.6f}")

crit = stationary(CubicModel(critical_a(1.0)))
slope, _ = edge_exponent_fit(density_spec(crit), crit.support[0], 1)
print(f"critical cubic lower-edge exponent: {slope:.4f}")

q = stationary(QuarticModel(critical_g(1.0)))
xq = np.linspace(-2.5, 2.5, 801)
svg_plot([{"x": xq, "y": density(q, xq), "label": "g = g_c"},
          {"x": xq, "y": density(stationary(QuarticModel(0.0)), xq), "label": "g = 0 (semicircle)"}],
         out / "quartic_densities.svg", title="quartic model, beta = 1", xlabel="x", ylabel="rho")
print(f"quartic g_c = {critical_g(1.0):.6f}: support = +-{q.support[1]:.6f}, rho(0) = {density(q, 0.0):.6f}"
      f" (4/(3 pi) = {4 / (3 * math.pi):.6f})")
