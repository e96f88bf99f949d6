"""
Averaged slow flow and singular orbits
======================================

On the cycle branch the slow variable only feels the average of its
right-hand side over one fast period.  Where that average vanishes relative
to the fold of cycles decides the singular picture.
"""

import numpy as np

from torcanard import singular, slowavg
from torcanard.models import make_model

canonical = make_model("canonical")
leid = make_model("leidenator", alpha=0.2)

# averaged equilibrium r = sqrt(k): on the outer (stable) branch iff k > 1
for k in (4.0, 1.0, 0.25):
    print(k, slowavg.avg_slow_equilibria(canonical, k))

# the leidenator shifts the boundary to k = 1 - alpha
print("boundary:", slowavg.singular_canard_k(leid))

# delayed Hopf passage along r = 0: the canonical exit mirrors the entry,
# the leidenator exit falls short because the slow flow brakes towards k/alpha
for mu_in in (-0.1, -0.3, -0.6):
    print(mu_in, slowavg.entry_exit(canonical, mu_in, 1.0), slowavg.entry_exit(leid, mu_in, 0.8))
print("buffer point:", slowavg.buffer_point(leid, 0.8).mu)

# regime cases and the singular families that live in them
for k in (2.0, 1.0, 0.5, 0.0, -0.3):
    rc = singular.classify_regime(canonical, k)
    print(f"canonical k={k:+.1f}: case {rc.case}  {rc.families}")
rc = singular.classify_regime(leid, 0.0)
print(f"leidenator k=0: case {rc.case}  {rc.families}")

# one member of each torus-canard family at the canard point
for fam in rc.families:
    orbit = singular.build_singular_family(leid, fam, 0.0)
    print(fam, [s.kind for s in orbit.segments], singular.validate(orbit).message)

orbit = singular.build_singular_family(canonical, "singular-TC-with-head", 1.0, p1=-0.4)
print("with head, p3 chosen by entry-exit:", orbit.parameters)

# the validator catches a jump off the middle of an attracting stretch
bad = singular.SingularOrbit("canonical", 1.0, 0.0, (singular.SingularSegment(
    "slow", np.column_stack([np.zeros(5), np.linspace(-0.9, -0.5, 5)])), singular.SingularSegment(
    "fast", np.column_stack([np.linspace(0, np.sqrt(1 + np.sqrt(0.5)), 5), np.full(5, -0.5)]))), False, "terminating")
print(singular.validate(bad))
