"""
Wilson-Cowan bursting
=====================

The same mechanism in a neural mass model.  The envelope of x(t) is read off
its successive extrema; quiet phases show up as a vanishing envelope.
"""

import numpy as np

from torcanard import hunt
from torcanard.models import make_model

wc = make_model("wilson-cowan", k=2.56, eps=1e-3)
traj = hunt.simulate(wc, hunt.default_y0(wc), 1e5)
t, amp, mu = hunt.envelope(wc, traj)
print("classification:", hunt.classify_trajectory(wc, traj, 2e4).label)

# burst boundaries: where the envelope switches on and off
on = amp > 0.5
edges = np.nonzero(np.diff(on.astype(int)))[0]
for i in edges[:8]:
    print(f"t={t[i]:9.1f}  mu={mu[i]:+.4f}  {'burst ends' if on[i] else 'burst starts'}")

# larger k pushes the averaged equilibrium onto the attracting cycles
for k in (2.4, 2.56, 2.7, 3.0, 3.7):
    print(k, hunt.classify(wc, {"k": k}).label)
