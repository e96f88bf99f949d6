"""Valid singular orbits and targeted corruptions of them, shared by the test modules."""

import math

import numpy as np

from torcanard.models import make_model
from torcanard.singular import (RULE_ATTRACTING_INTERIOR, RULE_CONTINUITY, RULE_ORIENTATION,
                                SingularOrbit, SingularSegment, build_singular_family)


def valid_pool():
    canonical = make_model("canonical")
    leid = make_model("leidenator", alpha=0.2)
    vdp = make_model("vanderpol")
    return [
        build_singular_family(canonical, "singular-TC-headless", 1.0, p1=-0.5),
        build_singular_family(canonical, "singular-TC-headless", 1.0, p1=-0.9),
        build_singular_family(canonical, "singular-maximal-TC", 1.0),
        build_singular_family(canonical, "singular-maximal-TC", 1.0, p3=0.4),
        build_singular_family(canonical, "singular-TC-with-head", 1.0, p1=-0.3),
        build_singular_family(canonical, "singular-bursting", 0.5),
        build_singular_family(canonical, "terminating", 2.0),
        build_singular_family(leid, "singular-mixed-TC-headless", 0.0, 0.2, p1=-0.4),
        build_singular_family(leid, "singular-maximal-mixed-TC", 0.0, 0.2),
        build_singular_family(leid, "singular-mixed-TC-with-head", 0.0, 0.2, p1=-0.6),
        build_singular_family(leid, "singular-bursting", 0.3, 0.2),
        build_singular_family(vdp, "relaxation"),
        build_singular_family(make_model("vanderpol", a=1.0), "canard-headless", x1=0.3),
        build_singular_family(make_model("vanderpol", a=1.0), "canard-with-head", x1=-0.4),
    ]


def _orbit(proto, segs, closed=False):
    return SingularOrbit(proto.model, proto.k, proto.alpha, tuple(segs), closed, proto.classification, a=proto.a)


def interior_jump(rng):
    """Fast jump from an interior point of an attracting stretch; rule iii at junction 0."""
    choice = rng.integers(3)
    n = 32
    if choice == 0:
        # van der Pol, right attracting branch, jumping left before the fold
        a = 0.5
        xc = rng.uniform(1.05, 1.95)
        x = np.linspace(2.0, xc, n)
        mu_c = xc - xc ** 3 / 3
        roots = np.roots([-1 / 3, 0, 1, -mu_c])
        xl = min(r.real for r in roots if abs(r.imag) < 1e-9)
        segs = [SingularSegment("slow", np.column_stack([x, x - x ** 3 / 3])),
                SingularSegment("fast", np.column_stack([np.linspace(xc, xl, n), np.full(n, mu_c)]))]
        return SingularOrbit("vanderpol", 0.0, 0.0, tuple(segs), False, "relaxation", a=a)
    if choice == 1:
        # r = 0 below the Hopf point, jumping up early
        k = rng.uniform(0.2, 3.0)
        mu_c = rng.uniform(-0.95, -0.05)
        ro = math.sqrt(1 + math.sqrt(1 + mu_c))
        segs = [SingularSegment("slow", np.column_stack([np.zeros(n), np.linspace(-1.0, mu_c, n)])),
                SingularSegment("fast", np.column_stack([np.linspace(0.0, ro, n), np.full(n, mu_c)]))]
        return SingularOrbit("canonical", k, 0.0, tuple(segs), False, "singular-bursting")
    # attracting cycle branch, jumping down before the fold
    rc = rng.uniform(1.05, 1.35)
    r = np.linspace(math.sqrt(2.0), rc, n)
    mu_c = rc ** 4 - 2 * rc ** 2
    segs = [SingularSegment("averaged-slow", np.column_stack([r, r ** 4 - 2 * r ** 2])),
            SingularSegment("fast", np.column_stack([np.linspace(rc, 0.0, n), np.full(n, mu_c)]))]
    return SingularOrbit("canonical", 0.5, 0.0, tuple(segs), False, "singular-bursting")


def orientation_flip(rng, pool):
    """Reverse one slow or averaged-slow segment; rule orientation at that segment."""
    while True:
        orbit = pool[rng.integers(len(pool))]
        idx = [i for i, s in enumerate(orbit.segments) if s.kind != "fast"]
        i = idx[rng.integers(len(idx))]
        segs = list(orbit.segments)
        segs[i] = segs[i].reversed()
        return _orbit(orbit, segs, orbit.closed), i


def junction_gap(rng, pool):
    """Shift a fast segment along the fast coordinate; continuity break at the junction before it."""
    while True:
        orbit = pool[rng.integers(len(pool))]
        idx = [i for i, s in enumerate(orbit.segments) if s.kind == "fast" and i > 0]
        if idx:
            break
    i = idx[rng.integers(len(idx))]
    gap = 10 ** rng.uniform(math.log10(2e-6), -2)
    segs = list(orbit.segments)
    pts = segs[i].points.copy()
    pts[:, 0] += gap
    segs[i] = SingularSegment("fast", pts)
    return _orbit(orbit, segs, orbit.closed), i - 1


def corrupted_orbits(count=50, seed=0):
    """``count`` corrupted orbits as ``(orbit, expected_rule, expected_index)``."""
    rng = np.random.default_rng(seed)
    pool = valid_pool()
    out = []
    for j in range(count):
        kind = j % 3
        if kind == 0:
            out.append((interior_jump(rng), RULE_ATTRACTING_INTERIOR, 0))
        elif kind == 1:
            orbit, i = orientation_flip(rng, pool)
            out.append((orbit, RULE_ORIENTATION, i))
        else:
            orbit, i = junction_gap(rng, pool)
            out.append((orbit, RULE_CONTINUITY, i))
    return out
