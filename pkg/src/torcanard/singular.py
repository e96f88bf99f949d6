"""Singular orbits: concatenations of slow, fast and averaged-slow segments.

Orbits live in the plane ``(u, mu)`` where ``u`` is the radius ``r`` for the
polar models and ``x`` for van der Pol.  Slow segments run along the critical
manifold (``r = 0``, resp. ``mu = x - x^3/3``), averaged-slow segments along
the cycle branch ``mu = r^4 - 2 r^2`` and fast segments at constant ``mu``.

:func:`validate` checks an orbit against the concatenation rules; the family
builders produce validated members of each family of the regime at hand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import slowavg
from .models import ModelSpec, cycle_branch_mu

__all__ = [
    "SingularSegment",
    "SingularOrbit",
    "ValidationResult",
    "RegimeCase",
    "FAMILY_LABELS",
    "validate",
    "classify_regime",
    "build_singular_family",
    "orbit_to_json",
    "orbit_from_json",
]

JUNCTION_TOL = 1e-8
SUPPORT_TOL = 1e-8
SPECIAL_TOL = 1e-8

FAMILY_LABELS = (
    "relaxation",
    "canard-headless",
    "canard-with-head",
    "singular-TC-headless",
    "singular-maximal-TC",
    "singular-TC-with-head",
    "singular-mixed-TC-headless",
    "singular-maximal-mixed-TC",
    "singular-mixed-TC-with-head",
    "singular-bursting",
    "terminating",
)

# rule identifiers reported by validate
RULE_SUPPORT = "support"
RULE_ORIENTATION = "orientation"
RULE_CONTINUITY = "continuity"
RULE_ATTRACTING_INTERIOR = "iii"  # fast departure from the interior of an attracting stretch
RULE_FAST_TARGET = "fast-target"
RULE_SLOW_AVG_HB = "slow-avg-hb"
RULE_CLOSURE = "closure"


@dataclass(frozen=True)
class SingularSegment:
    """One piece of a singular orbit; ``points`` are ``(u, mu)`` rows in traversal order."""

    kind: str  # "slow", "fast" or "averaged-slow"
    points: np.ndarray

    def __post_init__(self):
        if self.kind not in ("slow", "fast", "averaged-slow"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("segment points must be an (n >= 2, 2) array")
        object.__setattr__(self, "points", pts)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def reversed(self) -> "SingularSegment":
        return SingularSegment(self.kind, self.points[::-1].copy())


@dataclass(frozen=True)
class SingularOrbit:
    model: str
    k: float
    alpha: float
    segments: tuple
    closed: bool
    classification: str
    a: float = 0.0  # van der Pol slow-nullcline offset
    open_end: bool = False  # final fast segment stops at a time horizon
    parameters: dict = field(default_factory=dict)

    @property
    def junctions(self) -> list:
        return [seg.end.copy() for seg in self.segments[:-1]]

    @property
    def points(self) -> np.ndarray:
        return np.vstack([s.points for s in self.segments])


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    rule: str | None = None
    junction: int | None = None
    message: str = ""

    def __bool__(self):
        return self.valid


@dataclass(frozen=True)
class RegimeCase:
    case: int
    model: str
    k: float
    alpha: float
    k_boundary: float
    families: tuple
    parametrization: dict
    description: str


# ------------------------------------------------------------ geometry

def _is_vdp(orbit_or_model):
    name = orbit_or_model if isinstance(orbit_or_model, str) else orbit_or_model.model
    return name == "vanderpol"


def _vdp_mu(x):
    return x - x ** 3 / 3.0


def _r_inner(mu):
    return math.sqrt(1.0 - math.sqrt(1.0 + mu))


def _r_outer(mu):
    return math.sqrt(1.0 + math.sqrt(1.0 + mu))


def _slow_speed(orbit, u, mu):
    if _is_vdp(orbit):
        return u - orbit.a
    return orbit.k - orbit.alpha * mu


def _avg_speed(orbit, r):
    return orbit.k - r * r - orbit.alpha * float(cycle_branch_mu(r))


def _fast_speed(orbit, u, mu):
    if _is_vdp(orbit):
        return u - u ** 3 / 3.0 - mu
    return u * (mu + 2.0 * u * u - u ** 4)


def _support_error(orbit, seg) -> float:
    u, mu = seg.points[:, 0], seg.points[:, 1]
    if seg.kind == "fast":
        return float(np.max(np.abs(mu - mu[0])))
    if _is_vdp(orbit):
        if seg.kind == "averaged-slow":
            return math.inf
        return float(np.max(np.abs(mu - _vdp_mu(u))))
    if seg.kind == "slow":
        return float(np.max(np.abs(u)))
    if np.any(u < 0):
        return math.inf
    return float(np.max(np.abs(mu - cycle_branch_mu(u))))


def _orientation_ok(orbit, seg) -> bool:
    pts = seg.points
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        if seg.kind == "fast":
            delta, speed = b[0] - a[0], _fast_speed(orbit, mid[0], a[1])
        elif seg.kind == "slow":
            delta, speed = b[1] - a[1], _slow_speed(orbit, mid[0], mid[1])
        else:
            delta, speed = b[1] - a[1], _avg_speed(orbit, mid[0])
        if abs(speed) > 1e-12 and abs(delta) > 0.0 and math.copysign(1.0, delta) != math.copysign(1.0, speed):
            return False
    return True


def _departure(orbit, seg) -> str:
    """Type of the end point of a slow/averaged-slow segment: repelling, special or attracting."""
    u, mu = seg.end
    if _is_vdp(orbit):
        if abs(abs(u) - 1.0) <= SPECIAL_TOL:
            return "special"
        return "attracting" if abs(u) > 1.0 else "repelling"
    if seg.kind == "slow":
        if abs(mu) <= SPECIAL_TOL:
            return "special"
        return "attracting" if mu < 0 else "repelling"
    if abs(u - 1.0) <= SPECIAL_TOL or u <= SPECIAL_TOL:
        return "special"
    return "attracting" if u > 1.0 else "repelling"


def _lands_on_attractor(orbit, point) -> bool:
    u, mu = point
    if _is_vdp(orbit):
        return abs(mu - _vdp_mu(u)) <= SUPPORT_TOL and abs(u) >= 1.0 - SPECIAL_TOL
    if abs(u) <= SUPPORT_TOL:
        return mu <= SPECIAL_TOL
    return abs(mu - cycle_branch_mu(u)) <= SUPPORT_TOL and u >= 1.0 - SPECIAL_TOL


def _at_hopf(orbit, point) -> bool:
    return abs(point[0]) <= SPECIAL_TOL and abs(point[1]) <= SPECIAL_TOL


def _check_junction(orbit, j, a, b, wrap=False):
    gap = float(np.max(np.abs(a.end - b.start)))
    if gap > JUNCTION_TOL:
        rule = RULE_CLOSURE if wrap else RULE_CONTINUITY
        return ValidationResult(False, rule, j, f"endpoint mismatch {gap:.3g} between segments")
    if a.kind != "fast" and b.kind == "fast":
        if _departure(orbit, a) == "attracting":
            return ValidationResult(False, RULE_ATTRACTING_INTERIOR, j,
                                    "fast segment leaves the interior of an attracting stretch")
    if a.kind == "fast":
        if b.kind == "fast" or not _lands_on_attractor(orbit, a.end):
            return ValidationResult(False, RULE_FAST_TARGET, j, "fast segment does not end on an attractor")
    if {a.kind, b.kind} == {"slow", "averaged-slow"} and not _at_hopf(orbit, a.end):
        return ValidationResult(False, RULE_SLOW_AVG_HB, j,
                                "slow and averaged-slow segments may only meet at the Hopf point")
    return None


def validate(orbit: SingularOrbit) -> ValidationResult:
    """Check ``orbit`` against the concatenation rules.

    The checks run in this order and the first failure is reported:
    support of every segment, orientation of slow and averaged-slow
    segments, then every junction (continuity, departure rule, fast-segment
    target, slow/averaged-slow meeting point), orientation of fast segments,
    and finally closure.  ``junction`` is the index ``j`` of the junction
    between segments ``j`` and ``j + 1`` (for the closing junction, the
    index of the last segment) or of the offending segment for per-segment
    rules.
    """
    segs = orbit.segments
    if not segs:
        return ValidationResult(False, RULE_SUPPORT, None, "empty orbit")
    for i, seg in enumerate(segs):
        err = _support_error(orbit, seg)
        if err > SUPPORT_TOL:
            return ValidationResult(False, RULE_SUPPORT, i, f"{seg.kind} segment off its support by {err:.3g}")
    for i, seg in enumerate(segs):
        if seg.kind != "fast" and not _orientation_ok(orbit, seg):
            return ValidationResult(False, RULE_ORIENTATION, i, f"{seg.kind} segment runs against its flow")
    for j in range(len(segs) - 1):
        bad = _check_junction(orbit, j, segs[j], segs[j + 1])
        if bad is not None:
            return bad
    last = segs[-1]
    if last.kind == "fast" and not orbit.closed and not orbit.open_end:
        if not _lands_on_attractor(orbit, last.end):
            return ValidationResult(False, RULE_FAST_TARGET, len(segs) - 1, "final fast segment ends off an attractor")
    for i, seg in enumerate(segs):
        if seg.kind == "fast" and not _orientation_ok(orbit, seg):
            return ValidationResult(False, RULE_ORIENTATION, i, "fast segment runs against the fast flow")
    if orbit.closed:
        bad = _check_junction(orbit, len(segs) - 1, segs[-1], segs[0], wrap=True)
        if bad is not None:
            return bad
    return ValidationResult(True, message=f"{len(segs)} segments, {len(segs) - 1 + orbit.closed} junctions admissible")


# ------------------------------------------------------- regime cases

def _k_alpha(model, k, alpha):
    k = model.params.k if k is None else float(k)
    a = 0.0 if model.name == "canonical" else (model.alpha if alpha is None else float(alpha))
    return k, a


_PARAMS = {
    "terminating": "start point p0 and jump point p1 on the critical manifold",
    "singular-TC-headless": "p1: mu on the repelling cycle branch, strictly between SN and HB",
    "singular-maximal-TC": "p3: mu >= 0 on the critical manifold where the orbit jumps up",
    "singular-TC-with-head": "p1 on the repelling cycle branch and p3 > 0 on the critical manifold",
    "singular-bursting": "p1: mu > 0 on the critical manifold where the orbit jumps up",
    "singular-mixed-TC-headless": "p1: mu on the repelling cycle branch, strictly between SN and HB",
    "singular-maximal-mixed-TC": "none (unique)",
    "singular-mixed-TC-with-head": "p1: mu on the repelling cycle branch, strictly between SN and HB",
    "relaxation": "none (unique)",
    "canard-headless": "x1 on the repelling branch of the critical manifold",
    "canard-with-head": "x1 on the repelling branch of the critical manifold",
}


def classify_regime(model: ModelSpec, k=None, alpha=None, *, tol=1e-12) -> RegimeCase:
    """Case 1-5 of the singular structure at ``k`` for the polar models.

    The boundary between Cases 1 and 3 is the value of ``k`` at which the
    averaged-slow equilibrium sits on the cycle fold (``k = 1 - alpha``).
    """
    if not model.is_polar:
        raise ValueError("regime cases are defined for the canonical and leidenator models")
    k, a = _k_alpha(model, k, alpha)
    kb = slowavg.singular_canard_k(model, a) if model.name == "leidenator" else 1.0
    if abs(k - kb) <= tol:
        case = 2
    elif k > kb:
        case = 1
    elif abs(k) <= tol:
        case = 4
    elif k > 0:
        case = 3
    else:
        case = 5
    mixed_capable = model.name == "leidenator" and a > 0
    if case == 1:
        fams = ("terminating",)
        desc = "stable averaged-slow equilibrium on the attracting cycle branch: tonic spiking"
    elif case == 2:
        fams = ("singular-TC-headless", "singular-maximal-TC", "singular-TC-with-head")
        desc = "averaged-slow nullcline through the cycle fold, which is a canard point"
    elif case == 3:
        fams = ("singular-bursting",)
        desc = "averaged-slow equilibrium on the repelling cycle branch: elliptic bursting"
    elif case == 4:
        if mixed_capable:
            fams = ("singular-mixed-TC-headless", "singular-maximal-mixed-TC", "singular-mixed-TC-with-head")
            desc = "buffer point at the Hopf point, no averaged-slow equilibrium"
        else:
            fams = ("terminating",)
            desc = "continuum of trivial equilibria on the critical manifold"
    else:
        if mixed_capable:
            fams = ("terminating",)
            desc = "stable equilibrium of the slow flow at the buffer point mu = k/alpha < 0"
        else:
            fams = ()
            desc = "no slow equilibrium: drift in mu towards -infinity"
    return RegimeCase(case, model.name, k, a, kb, fams, {f: _PARAMS[f] for f in fams}, desc)


# ----------------------------------------------------- family builders

def _slow(mu_a, mu_b, n):
    mu = np.linspace(mu_a, mu_b, n)
    return SingularSegment("slow", np.column_stack([np.zeros(n), mu]))


def _avg(r_a, r_b, n):
    r = np.linspace(r_a, r_b, n)
    return SingularSegment("averaged-slow", np.column_stack([r, cycle_branch_mu(r)]))


def _fast(u_a, u_b, mu, n):
    u = np.linspace(u_a, u_b, n)
    return SingularSegment("fast", np.column_stack([u, np.full(n, float(mu))]))


def _vdp_slow(x_a, x_b, n):
    x = np.linspace(x_a, x_b, n)
    return SingularSegment("slow", np.column_stack([x, _vdp_mu(x)]))


def _vdp_outer_root(mu, side):
    # root of x - x^3/3 = mu on the attracting branch on ``side`` (+1 right, -1 left)
    roots = np.roots([-1.0 / 3.0, 0.0, 1.0, -mu])
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-9)
    x = real[-1] if side > 0 else real[0]
    if side * x < 1.0 - 1e-12:
        raise ValueError("no attracting branch at this mu")
    return float(x)


def _default_mu_max():
    # 2 max(|mu_HB|, |mu_SN|) + 1 with mu_HB = 0 and mu_SN = -1
    return 2.0 * max(0.0, 1.0) + 1.0


def _check_range(name, value, lo, hi, lo_open=True, hi_open=True):
    ok_lo = value > lo if lo_open else value >= lo
    ok_hi = value < hi if hi_open else value <= hi
    if not (ok_lo and ok_hi):
        lb, rb = "(" if lo_open else "[", ")" if hi_open else "]"
        raise ValueError(f"{name}={value} outside the family range {lb}{lo}, {hi}{rb}")


def build_singular_family(model: ModelSpec, family: str, k=None, alpha=None, *, p0=None, p1=None,
                          p3=None, x1=None, n=64, mu_max=None) -> SingularOrbit:
    """Member of a singular-orbit family, validated before it is returned.

    Parameters are ``mu`` values (``x`` for the van der Pol canards):

    - ``singular-TC-headless`` / ``singular-TC-with-head`` / mixed variants:
      ``p1`` in ``(-1, 0)``, the point on the repelling cycle branch where
      the fast jump starts (default ``-0.5``).
    - ``singular-TC-with-head``: ``p3 > 0`` on the critical manifold; when
      omitted it is selected by the entry-exit balance with the landing point.
    - ``singular-maximal-TC``: ``p3 >= 0`` (default 0, the jump at HB).
    - ``singular-bursting``: ``p1 > 0`` (default from entry-exit with entry at ``mu = -1``).
    - ``terminating``: ``p0`` start and ``p1`` jump point where applicable.

    Jump points on ``r = 0`` are capped at ``mu_max`` (default
    ``2 max(|mu_HB|, |mu_SN|) + 1``) and, for the leidenator, below the
    buffer point.
    """
    if family not in FAMILY_LABELS:
        raise ValueError(f"unknown family {family!r}")
    if model.name == "vanderpol":
        return _build_vdp(model, family, x1, n)
    if not model.is_polar:
        raise ValueError("singular orbits are built for van der Pol and the polar models")
    k, a = _k_alpha(model, k, alpha)
    regime = classify_regime(model, k, a)
    if family not in regime.families:
        raise ValueError(f"family {family!r} not available in Case {regime.case} (k={k}, alpha={a}); "
                         f"available: {regime.families}")
    mu_max = _default_mu_max() if mu_max is None else float(mu_max)
    mu_cap = min(mu_max, k / a) if a > 0 and k > 0 else mu_max
    r_sn = 1.0
    segs = []
    closed = True
    params = {}

    if family in ("singular-TC-headless", "singular-TC-with-head",
                  "singular-mixed-TC-headless", "singular-mixed-TC-with-head"):
        p1 = -0.5 if p1 is None else float(p1)
        _check_range("p1", p1, -1.0, 0.0)
        params["p1"] = p1
        r1, ro = _r_inner(p1), _r_outer(p1)

    if family == "singular-TC-headless":
        segs = [_avg(r_sn, r1, n), _fast(r1, ro, p1, n), _avg(ro, r_sn, n)]
    elif family == "singular-TC-with-head":
        if p3 is None:
            p3 = slowavg.entry_exit(model, p1, k, a)
        p3 = float(p3)
        _check_range("p3", p3, 0.0, mu_cap, hi_open=False)
        params["p3"] = p3
        segs = [_avg(r_sn, r1, n), _fast(r1, 0.0, p1, n), _slow(p1, p3, n),
                _fast(0.0, _r_outer(p3), p3, n), _avg(_r_outer(p3), r_sn, n)]
    elif family == "singular-maximal-TC":
        p3 = 0.0 if p3 is None else float(p3)
        _check_range("p3", p3, 0.0, mu_cap, lo_open=False, hi_open=False)
        params["p3"] = p3
        segs = [_avg(r_sn, 0.0, n)]
        if p3 > 0:
            segs.append(_slow(0.0, p3, n))
        segs += [_fast(0.0, _r_outer(p3), p3, n), _avg(_r_outer(p3), r_sn, n)]
    elif family == "singular-mixed-TC-headless":
        segs = [_avg(0.0, r1, n), _fast(r1, 0.0, p1, n), _slow(p1, 0.0, n)]
    elif family == "singular-mixed-TC-with-head":
        segs = [_avg(0.0, r1, n), _fast(r1, ro, p1, n), _avg(ro, r_sn, n),
                _fast(r_sn, 0.0, -1.0, n), _slow(-1.0, 0.0, n)]
    elif family == "singular-maximal-mixed-TC":
        segs = [_avg(0.0, r_sn, n), _fast(r_sn, 0.0, -1.0, n), _slow(-1.0, 0.0, n)]
    elif family == "singular-bursting":
        if p1 is None:
            p1 = slowavg.entry_exit(model, -1.0, k, a)
        p1 = float(p1)
        _check_range("p1", p1, 0.0, mu_cap, hi_open=False)
        params["p1"] = p1
        segs = [_slow(-1.0, p1, n), _fast(0.0, _r_outer(p1), p1, n), _avg(_r_outer(p1), r_sn, n),
                _fast(r_sn, 0.0, -1.0, n)]
    elif family == "terminating":
        closed = False
        if regime.case == 1:
            p0 = -0.5 if p0 is None else float(p0)
            _check_range("p0", p0, -math.inf, 0.0)
            if p1 is None:
                p1 = slowavg.entry_exit(model, p0, k, a)
            p1 = float(p1)
            _check_range("p1", p1, 0.0, mu_cap, hi_open=False)
            r_eq = slowavg.avg_slow_equilibria(model, k, a)[-1][0]
            params.update(p0=p0, p1=p1)
            segs = [_slow(p0, p1, n), _fast(0.0, _r_outer(p1), p1, n), _avg(_r_outer(p1), r_eq, n)]
        else:
            # from the attracting cycle branch down to the fold and onto r = 0
            p0 = 0.0 if p0 is None else float(p0)
            _check_range("p0", p0, -1.0, math.inf)
            params["p0"] = p0
            segs = [_avg(_r_outer(p0), r_sn, n), _fast(r_sn, 0.0, -1.0, n)]
            if regime.case == 5:
                segs.append(_slow(-1.0, k / a, n))
    orbit = SingularOrbit(model.name, k, a, tuple(segs), closed, family, parameters=params)
    return _validated(orbit)


def _build_vdp(model, family, x1, n):
    a = model.params.a
    if family == "relaxation":
        if not -1.0 < a <= 1.0:
            raise ValueError("relaxation cycles need -1 < a <= 1")
        segs = [_vdp_slow(2.0, 1.0, n), _fast(1.0, -2.0, 2.0 / 3.0, n),
                _vdp_slow(-2.0, -1.0, n), _fast(-1.0, 2.0, -2.0 / 3.0, n)]
        closed, params = True, {}
    elif family in ("canard-headless", "canard-with-head"):
        if a != 1.0:
            raise ValueError("canard cycles need the slow nullcline through the fold: a = 1")
        x1 = 0.0 if x1 is None else float(x1)
        _check_range("x1", x1, -1.0, 1.0)
        mu1 = _vdp_mu(x1)
        params = {"x1": x1}
        closed = True
        if family == "canard-headless":
            xr = _vdp_outer_root(mu1, +1)
            segs = [_vdp_slow(1.0, x1, n), _fast(x1, xr, mu1, n), _vdp_slow(xr, 1.0, n)]
        else:
            xl = _vdp_outer_root(mu1, -1)
            segs = [_vdp_slow(1.0, x1, n), _fast(x1, xl, mu1, n), _vdp_slow(xl, -1.0, n),
                    _fast(-1.0, 2.0, -2.0 / 3.0, n), _vdp_slow(2.0, 1.0, n)]
    elif family == "terminating":
        if not a > 1.0:
            raise ValueError("terminating van der Pol orbits need the equilibrium on the right branch: a > 1")
        segs = [_vdp_slow(-2.0, -1.0, n), _fast(-1.0, 2.0, -2.0 / 3.0, n), _vdp_slow(2.0, a, n)]
        closed, params = False, {}
    else:
        raise ValueError(f"family {family!r} is not a van der Pol family")
    orbit = SingularOrbit("vanderpol", 0.0, 0.0, tuple(segs), closed, family, a=a, parameters=params)
    return _validated(orbit)


def _validated(orbit):
    res = validate(orbit)
    if not res:
        raise RuntimeError(f"constructed orbit failed validation: rule {res.rule} at {res.junction}: {res.message}")
    return orbit


# -------------------------------------------------------------- JSON

def orbit_to_json(orbit: SingularOrbit, provenance=None) -> str:
    coords = ["x", "mu"] if _is_vdp(orbit) else ["r", "mu"]
    doc = {
        "model": orbit.model,
        "k": orbit.k,
        "alpha": orbit.alpha,
        "a": orbit.a,
        "classification": orbit.classification,
        "closed": orbit.closed,
        "open_end": orbit.open_end,
        "coordinates": coords,
        "parameters": orbit.parameters,
        "segments": [{"kind": s.kind, "points": s.points.tolist()} for s in orbit.segments],
        "junctions": [j.tolist() for j in orbit.junctions],
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return json.dumps(doc, indent=1)


def orbit_from_json(text: str) -> SingularOrbit:
    doc = json.loads(text)
    segs = tuple(SingularSegment(s["kind"], np.array(s["points"])) for s in doc["segments"])
    return SingularOrbit(doc["model"], doc["k"], doc["alpha"], segs, doc["closed"], doc["classification"],
                         a=doc.get("a", 0.0), open_end=doc.get("open_end", False),
                         parameters=doc.get("parameters", {}))
