"""
Fast subsystem of the elliptic bursters
=======================================

Freeze mu and look at what the fast variables do.  For the polar models
everything is closed-form; Wilson-Cowan goes through numerical continuation.
"""

import numpy as np

from torcanard import fastbif
from torcanard.models import make_model

# the polar burster: r = 0 loses stability at mu = 0 (subcritical Hopf)
canonical = make_model("canonical")
eq = fastbif.critical_manifold(canonical, (-1.0, 1.0), 0.25)
for mu, s in zip(eq.mu, eq.stability):
    print(f"mu={mu:+.2f}  r=0 is {s}")

# the cycles live on mu = r^4 - 2 r^2; they fold at (r, mu) = (1, -1)
cyc = fastbif.cycle_branch(canonical, n=9)
for r, mu, s in zip(cyc.amplitude, cyc.mu, cyc.stability):
    print(f"r={r:.3f}  mu={mu:+.4f}  {s}")
mu_sn, rec = fastbif.sn_of_cycles(canonical)
print("fold of cycles:", mu_sn, rec.amplitude)

# Wilson-Cowan: continue the equilibria, find the Hopf points and folds
wc = make_model("wilson-cowan")
eq = fastbif.critical_manifold(wc, (-8.0, 0.0), 0.01)
for sp in eq.special_points:
    print(f"{sp.type:20s} mu={sp.mu:.10f}")

# the cycle family born at the right-most Hopf point is subcritical too:
# it turns around at a fold of cycles and becomes attracting
branch = fastbif.cycle_branch(wc)
mu_sn, rec = fastbif.sn_of_cycles(wc, branch)
print(f"{len(branch)} cycles, fold at mu={mu_sn:.10f} amplitude {rec.amplitude:.4f} period {rec.period:.3f}")
i = np.argmax(branch.amplitude)
print(f"largest sampled cycle: amplitude {branch.amplitude[i]:.4f} ({branch.stability[i]})")
