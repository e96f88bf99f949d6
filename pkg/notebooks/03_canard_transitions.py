"""
Locating torus canard transitions
=================================

At eps > 0 the singular boundary k = 1 - alpha opens into a thin k interval
where the orbit follows the repelling cycles before either returning to
spiking (headless) or dropping into a burst (with head).  Bisection on the
trajectory label finds it.
"""

from torcanard import hunt
from torcanard.models import make_model

leid = make_model("leidenator", eps=1e-3, alpha=0.2)

# a coarse regime map across the singular cases
for rep in hunt.sweep(leid, [-0.2, 0.0, 0.3, 0.79, 0.81, 1.5]):
    print(f"k={rep.k:+.2f}  case {rep.case.case}  {rep.label}")

# classical torus canard: tonic spiking -> bursting
res = hunt.bisect_transition(leid, None, 0.799, 0.801, "tonic|bursting", 1e-9)
print(f"k* = {res.k_star!r} (width {res.width:.1e}): {res.label_lo} | {res.label_hi}")

# the offset from the singular value scales linearly with eps
for eps in (5e-4, 1e-3, 2e-3):
    r = hunt.bisect_transition(leid.with_params(eps=eps), None, 0.799, 0.801, "tonic|bursting", 1e-9)
    print(f"eps={eps:g}  k* - 0.8 = {r.k_star - 0.8:+.4e}")

# larger eps shows the adherence to the repelling branch clearly
m = make_model("leidenator", eps=0.01, alpha=0.2)
r = hunt.bisect_transition(m, None, 0.79, 0.81, "tonic|bursting", 1e-10)
for k in (r.k_lo, r.k_hi):
    c = hunt.classify(m, {"k": k})
    print(f"k={k!r}  {c.label}  span {c.evidence['adherence_span']:.3f}")

# mixed-type torus canard near the Hopf point at k ~ 0
m = make_model("leidenator", eps=0.05, alpha=0.2)
r = hunt.bisect_transition(m, None, 0.0005, 0.003, "bursting|rest", 1e-8, horizon=8e4, transient=2e4)
print(f"mixed k* = {r.k_star!r}: {r.label_lo} | {r.label_hi}")
