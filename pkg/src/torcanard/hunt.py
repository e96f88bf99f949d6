"""Full-system trajectory classification and location of canard transitions in k.

A trajectory is reduced to an *envelope*: the radius ``r(t)`` for the polar
models, half the peak-to-trough height of ``x`` at successive maxima for
Wilson-Cowan.  The envelope, the slow variable and the fast-subsystem cycle
branch are enough to tell tonic spiking, bursting, rest, drift and the torus
canard passages apart.  :func:`bisect_transition` then brackets the value of
``k`` at which the label flips between two groups of labels.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import fastbif, singular
from .models import MODEL_PARAMETERS, ModelSpec, vector_field
from .ode import IntegrationError, IntegratorConfig, Trajectory, integrate

__all__ = [
    "LABELS",
    "PREDICATES",
    "HUNT_CFG",
    "Thresholds",
    "Predicate",
    "TrajectoryClass",
    "TransitionResult",
    "RegimeReport",
    "BranchGeometry",
    "default_y0",
    "simulate",
    "envelope",
    "branch_geometry",
    "classify_trajectory",
    "classify",
    "bisect_transition",
    "sweep",
    "write_regime_csv",
    "REGIME_COLUMNS",
]

log = logging.getLogger(__name__)

LABELS = ("tonic", "bursting", "tc-headless", "tc-with-head", "mixed-tc-headless",
          "mixed-tc-with-head", "rest", "drift")
INCONCLUSIVE = "inconclusive"

HUNT_CFG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, max_step=1.0)

K_TOL_FLOOR = 1e-13


@dataclass(frozen=True)
class Thresholds:
    """Envelope thresholds; amplitudes in envelope units, spans in mu.

    ``transient`` and ``horizon`` are in units of ``1/eps`` (fast time).
    ``gap`` is the longest fast-time interval between two maxima of ``x``
    that still counts as oscillating (Wilson-Cowan only).  ``rest_margin``
    is how far past the Hopf point (in mu) a quiet state may settle and
    still count as rest.
    """

    r_quiet: float = 0.05
    r_spike: float = 1.2
    r_rest: float = 0.5
    d_branch: float = 0.05
    s_min: float = 0.05
    transient: float = 3.0
    horizon: float = 10.0
    mu_window: tuple = (-10.0, 10.0)
    converge_ratio: float = 0.9
    mu_tol: float = 1e-9
    gap: float = 50.0
    rest_margin: float = 0.05

    @classmethod
    def for_model(cls, model: ModelSpec) -> "Thresholds":
        if model.name == "wilson-cowan":
            # active amplitude ~0.85, quiet amplitude ~1e-2 in x; quiet phases
            # near the Hopf point last up to ~30/eps
            return cls(r_quiet=0.02, r_spike=0.5, r_rest=0.2, transient=20.0, horizon=100.0,
                       mu_window=(-25.0, 15.0))
        return cls()


@dataclass(frozen=True)
class Predicate:
    """Two disjoint groups of labels; a transition is a flip between them."""

    name: str
    side_a: frozenset
    side_b: frozenset

    def side(self, label: str):
        if label in self.side_a:
            return "a"
        if label in self.side_b:
            return "b"
        return None


PREDICATES = {
    "tonic|bursting": Predicate("tonic|bursting", frozenset({"tonic", "tc-headless"}),
                                frozenset({"bursting", "tc-with-head"})),
    "bursting|rest": Predicate("bursting|rest", frozenset({"bursting", "mixed-tc-with-head"}),
                               frozenset({"rest", "mixed-tc-headless"})),
    "rest|drift": Predicate("rest|drift", frozenset({"rest"}), frozenset({"drift"})),
}


@dataclass
class TrajectoryClass:
    label: str
    evidence: dict = field(default_factory=dict)
    inconclusive: bool = False
    reason: str = ""

    def __str__(self):
        return f"{self.label} ({self.reason})" if self.reason else self.label


@dataclass
class TransitionResult:
    k_star: float
    k_lo: float
    k_hi: float
    width: float
    predicate: str
    label_lo: str
    label_hi: str
    model: str
    params: dict
    y0: tuple
    horizon: float
    transient: float
    integrator: dict
    thresholds: dict
    inconclusive: bool = False
    reason: str = ""
    evaluations: list = field(default_factory=list)

    def to_json(self, provenance=None) -> str:
        doc = asdict(self)
        if provenance is not None:
            doc["provenance"] = provenance
        return json.dumps(doc, indent=1, default=_json_default)


@dataclass
class RegimeReport:
    k: float
    case: singular.RegimeCase | None
    classification: TrajectoryClass

    @property
    def label(self) -> str:
        return self.classification.label


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (tuple, frozenset, set)):
        return list(o)
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# ------------------------------------------------------------ simulation

def default_y0(model: ModelSpec) -> tuple:
    """Fixed initial condition: ``(r, theta, mu)`` for polar models, ``(x, y, mu)`` otherwise."""
    if model.is_polar:
        return (1.8, 0.0, 0.5)
    if model.name == "wilson-cowan":
        return (0.1, 0.1, 2.0)
    return (2.0, 0.5)


def simulate(model: ModelSpec, y0=None, horizon: float = 1e4, cfg: IntegratorConfig | None = None,
             *, dense: bool = False) -> Trajectory:
    """Integrate the full system from ``y0`` over ``(0, horizon)`` in fast time.

    Polar models take and return ``(r, theta, mu)`` and are integrated in
    ``(log r, theta, mu)``, so the radius may fall to ``1e-300`` during quiet
    phases without losing the delayed-Hopf timing.  ``r0 = 0`` stays on the
    invariant line ``r = 0``.
    """
    cfg = cfg or HUNT_CFG
    y0 = tuple(float(v) for v in (default_y0(model) if y0 is None else y0))
    if model.is_polar:
        if y0[0] < 0:
            raise ValueError("polar initial radius must be non-negative")
        if y0[0] == 0.0:
            return integrate(vector_field(model, "polar"), y0, (0.0, horizon), cfg, dense=dense)
        s0 = (math.log(y0[0]), y0[1], y0[2])
        traj = integrate(vector_field(model, "polar", log_radius=True), s0, (0.0, horizon), cfg, dense=dense)
        states = traj.states.copy()
        states[:, 0] = np.exp(states[:, 0])
        # dense output stays in log-radius form; only samples are converted
        return replace(traj, states=states, cont=None)
    return integrate(vector_field(model), y0, (0.0, horizon), cfg, dense=dense)


def envelope(model: ModelSpec, traj: Trajectory, gap: float = 50.0):
    """Oscillation envelope ``(t, amplitude, mu)`` of a full-system trajectory.

    Polar models: the radius itself.  Otherwise one sample per local maximum
    of ``x`` with amplitude half the rise from the preceding minimum; a
    stretch longer than ``gap`` without maxima is recorded as amplitude 0.
    """
    t, s = traj.times, traj.states
    if model.is_polar:
        return t, s[:, 0].copy(), s[:, -1].copy()
    x = s[:, 0]
    imax = np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))[0] + 1
    imin = np.nonzero((x[1:-1] < x[:-2]) & (x[1:-1] <= x[2:]))[0] + 1
    pos = np.searchsorted(imin, imax) - 1
    keep = pos >= 0
    imax, pos = imax[keep], pos[keep]
    te = t[imax]
    amp = 0.5 * (x[imax] - x[imin[pos]])
    # fill silent stretches (node-like rest) with zero-amplitude samples
    edges = np.concatenate(([t[0]], te, [t[-1]]))
    tt, aa = [], []
    for j in range(len(edges) - 1):
        if edges[j + 1] - edges[j] > gap:
            fill = np.arange(edges[j] + gap / 2, edges[j + 1], gap / 2)
            tt.append(fill)
            aa.append(np.zeros(len(fill)))
        if j < len(te):
            tt.append(te[j:j + 1])
            aa.append(amp[j:j + 1])
    if not tt:
        return np.array([t[-1]]), np.zeros(1), s[-1:, -1].copy()
    te = np.concatenate(tt)
    amp = np.concatenate(aa)
    return te, amp, np.interp(te, t, s[:, -1])


# --------------------------------------------------- cycle branch geometry

@dataclass(frozen=True)
class BranchGeometry:
    """Attracting and repelling amplitude of fast cycles as functions of mu."""

    mu_rep: np.ndarray
    amp_rep: np.ndarray
    mu_att: np.ndarray
    amp_att: np.ndarray
    amp_sn: float

    def repelling(self, mu):
        return np.interp(mu, self.mu_rep, self.amp_rep, left=np.nan, right=np.nan)

    def attracting(self, mu):
        return np.interp(mu, self.mu_att, self.amp_att, left=np.nan, right=np.nan)


def _polar_geometry() -> BranchGeometry:
    mu = np.linspace(-1.0, 0.0, 2001)
    root = np.sqrt(1.0 + mu)
    return BranchGeometry(mu, np.sqrt(1.0 - root), mu, np.sqrt(1.0 + root), 1.0)


def _fast_key(model: ModelSpec):
    # the fast subsystem does not see k or eps
    return model.with_params(k=0.0, eps=0.0)


@lru_cache(maxsize=8)
def _wc_geometry(key: ModelSpec) -> BranchGeometry:
    branch = fastbif.cycle_branch(key)
    _, sn = fastbif.sn_of_cycles(key, branch)
    amp = np.asarray(branch.amplitude)
    rep = np.array([s == fastbif.REPELLING for s in branch.stability])
    att = np.array([s == fastbif.ATTRACTING for s in branch.stability])

    def side(mask):
        # both sides end at the fold, which bounds the branch in mu
        mu = np.append(branch.mu[mask], sn.mu)
        a = np.append(amp[mask], sn.amplitude)
        order = np.argsort(mu)
        return mu[order], a[order]

    return BranchGeometry(*side(rep), *side(att), float(sn.amplitude))


def branch_geometry(model: ModelSpec) -> BranchGeometry:
    if model.is_polar:
        return _polar_geometry()
    if model.name == "wilson-cowan":
        return _wc_geometry(_fast_key(model))
    raise ValueError(f"{model.name} has no fast cycle branch")


# ---------------------------------------------------------- classification

def _runs(mask):
    """(start, stop) index pairs of the True runs of ``mask``."""
    d = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return list(zip(np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]))


def _passages(t, env, mu, geo: BranchGeometry, th: Thresholds, t_from: float):
    """Repelling-branch adherence runs and how they begin and end.

    A run starting from the attracting cycle branch is a classical passage
    (entered at the fold), one starting from the quiet state a mixed passage
    (entered at the Hopf point).  It is headless if the orbit returns to where
    it came from and has a head if it jumps to the other attractor.
    """
    rep = geo.repelling(mu)
    att = geo.attracting(mu)
    ok = np.isfinite(rep) & (env >= th.r_quiet)
    d_rep = np.abs(env - rep)
    d_att = np.where(np.isfinite(att), np.abs(env - att), np.inf)
    mask = ok & (d_rep < th.d_branch) & (d_rep < d_att)
    high = env >= geo.amp_sn - th.d_branch
    low = env < th.r_quiet
    out = []
    for i0, i1 in _runs(mask):
        if t[i1 - 1] < t_from:
            continue
        span = float(np.ptp(mu[i0:i1]))
        if span < th.s_min:
            continue
        before_hi = np.nonzero(high[:i0])[0]
        before_lo = np.nonzero(low[:i0])[0]
        if not len(before_hi) and not len(before_lo):
            continue
        origin = "high" if (before_lo[-1] if len(before_lo) else -1) < (before_hi[-1] if len(before_hi) else -1) else "low"
        after_hi = np.nonzero(high[i1:])[0]
        after_lo = np.nonzero(low[i1:])[0]
        if not len(after_hi) and not len(after_lo):
            continue  # unresolved at the end of the record
        nxt_hi = after_hi[0] if len(after_hi) else np.inf
        nxt_lo = after_lo[0] if len(after_lo) else np.inf
        outcome = "high" if nxt_hi < nxt_lo else "low"
        out.append(dict(geometry="classical" if origin == "high" else "mixed",
                        head=outcome != origin, span=span,
                        mu_from=float(mu[i0]), mu_to=float(mu[i1 - 1]), t=float(t[i0])))
    return out


@lru_cache(maxsize=8)
def _wc_hopf_mu(key: ModelSpec) -> float:
    return fastbif.rightmost_hopf(key).mu


def _quiet_target_ok(model: ModelSpec, mu, state, margin) -> bool:
    """Whether a quiet state heading for ``mu`` stays on an attracting fast equilibrium.

    Polar models use the exact end point of the slow flow on ``r = 0``.
    """
    if model.is_polar:
        k, a = model.params.k, model.alpha
        return k / a <= margin if a > 0 else k <= 0.0
    if model.name == "wilson-cowan":
        if not math.isfinite(mu) or abs(mu - _wc_hopf_mu(_fast_key(model))) <= margin:
            return True
        try:
            eq = fastbif.equilibrium_at(model, mu, state)
        except Exception:  # no equilibrium nearby: cannot vouch for it
            return False
        return fastbif._stability(model, eq) == fastbif.ATTRACTING
    return True


def _aitken(a0, a1, a2):
    d1, d2 = a1 - a0, a2 - a1
    den = d2 - d1
    if den == 0.0 or d1 == 0.0 or d2 / d1 <= 0.0 or d2 / d1 >= 1.0:
        return a2
    return a2 - d2 * d2 / den


def classify_trajectory(model: ModelSpec, traj: Trajectory, transient: float,
                        thresholds: Thresholds | None = None, geometry: BranchGeometry | None = None
                        ) -> TrajectoryClass:
    """Label a full-system trajectory from its envelope after ``transient``."""
    th = thresholds or Thresholds.for_model(model)
    t_all, env_all, mu_all = envelope(model, traj, th.gap)
    lo_mu, hi_mu = th.mu_window
    ev = dict(t_end=float(traj.t1), transient=float(transient))
    if not np.all(np.isfinite(traj.states[:, -1])) or np.any((mu_all < lo_mu) | (mu_all > hi_mu)):
        ev["mu_end"] = float(traj.states[-1, -1])
        return TrajectoryClass("drift", ev, reason="mu left the window")
    w = t_all >= transient
    if w.sum() < 3:
        return TrajectoryClass(INCONCLUSIVE, ev, True, "too few envelope samples after the transient")
    t, env, mu = t_all[w], env_all[w], mu_all[w]

    quiet = env < th.r_quiet
    spike = env > th.r_spike
    phase = np.where(quiet, -1, np.where(spike, 1, 0))
    phase = phase[phase != 0]
    n_alt = int(np.count_nonzero(phase[1:] != phase[:-1])) if len(phase) else 0

    # mu at three equally spaced times of the window, for convergence
    tm = np.linspace(t[0], t[-1], 3)
    m3 = np.interp(tm, traj.times, traj.states[:, -1])
    d1, d2 = m3[1] - m3[0], m3[2] - m3[1]
    ratio = abs(d2) / abs(d1) if d1 != 0.0 else 0.0
    ev.update(env_min=float(env.min()), env_max=float(env.max()),
              frac_quiet=float(quiet.mean()), frac_spike=float(spike.mean()),
              n_alternations=n_alt, mu_min=float(mu.min()), mu_max=float(mu.max()),
              mu_end=float(traj.states[-1, -1]), mu_limit=float(_aitken(*m3)),
              mu_ratio=float(ratio), adherence_span=0.0)

    geo = geometry
    if geo is None and model.name != "vanderpol":
        geo = branch_geometry(model)
    passages = _passages(t_all, env_all, mu_all, geo, th, transient) if geo is not None else []
    if passages:
        best = max(passages, key=lambda p: (p["span"], p["t"]))
        ev.update(adherence_span=best["span"], passage_geometry=best["geometry"],
                  passage_head=best["head"], n_passages=len(passages))
    else:
        best = None

    def tc(head):
        if best is None or best["head"] != head:
            return None
        prefix = "mixed-" if best["geometry"] == "mixed" else ""
        return prefix + ("tc-with-head" if head else "tc-headless")

    if n_alt >= 2:
        return TrajectoryClass(tc(True) or "bursting", ev)
    if n_alt == 1:
        return TrajectoryClass(INCONCLUSIVE, ev, True,
                               "single quiet/spike transition: horizon too short")
    if not quiet.any():
        label = tc(False) if best is not None and best["geometry"] == "classical" else None
        return TrajectoryClass(label or "tonic", ev)
    if not spike.any():
        if best is not None and best["geometry"] == "mixed" and not best["head"]:
            return TrajectoryClass("mixed-tc-headless", ev)
        if env.max() < th.r_rest:
            settled = abs(d1) + abs(d2) < th.mu_tol or ratio < th.converge_ratio
            wmu = np.diff(traj.states[traj.times >= transient, -1])
            monotone = np.all(wmu <= 0.0) or np.all(wmu >= 0.0)
            drift = not settled and monotone
            # a quiet phase that will cross the Hopf point is not rest
            target = m3[2] + 2.0 * (d1 + d2) if drift else ev["mu_limit"]
            on_line = model.is_polar and traj.states[0, 0] == 0.0  # r = 0 is invariant
            if not on_line and not _quiet_target_ok(model, target, traj.states[-1], th.rest_margin):
                return TrajectoryClass(INCONCLUSIVE, ev, True,
                                       "quiet phase heading past the Hopf point: horizon too short")
            if drift:
                return TrajectoryClass("drift", ev, reason="mu drifts at non-decaying speed")
            return TrajectoryClass("rest", ev)
    return TrajectoryClass(INCONCLUSIVE, ev, True, "no quiet/spike alternation and no rest")


def _resolve(model, params, th):
    model = model.with_params(**params) if params else model
    th = th or Thresholds.for_model(model)
    return model, th


def classify(model: ModelSpec, params: dict | None = None, y0=None, horizon: float | None = None, *,
             transient: float | None = None, thresholds: Thresholds | None = None,
             cfg: IntegratorConfig | None = None, geometry: BranchGeometry | None = None) -> TrajectoryClass:
    """Simulate and classify one trajectory.

    ``horizon`` and ``transient`` default to ``thresholds.horizon / eps`` and
    ``thresholds.transient / eps``.  Integration failures are reported as
    ``drift`` (non-finite state) or inconclusive (step limit).
    """
    model, th = _resolve(model, params, thresholds)
    eps = model.params.eps
    horizon = th.horizon / eps if horizon is None else float(horizon)
    transient = th.transient / eps if transient is None else float(transient)
    if not horizon > transient:
        raise ValueError(f"horizon {horizon} must exceed the transient {transient}")
    try:
        traj = simulate(model, y0, horizon, cfg)
    except IntegrationError as err:
        ev = dict(error=str(err))
        if "non-finite" in str(err):
            return TrajectoryClass("drift", ev, reason="state diverged")
        return TrajectoryClass(INCONCLUSIVE, ev, True, str(err))
    return classify_trajectory(model, traj, transient, th, geometry)


# ------------------------------------------------------------- bisection

def _predicate(p) -> Predicate:
    if isinstance(p, Predicate):
        return p
    try:
        return PREDICATES[p]
    except KeyError:
        raise ValueError(f"unknown predicate {p!r}; expected one of {sorted(PREDICATES)}") from None


def bisect_transition(model: ModelSpec, params: dict | None, k_lo: float, k_hi: float, predicate,
                      tol_k: float = 1e-9, *, y0=None, horizon=None, transient=None,
                      thresholds: Thresholds | None = None, cfg: IntegratorConfig | None = None
                      ) -> TransitionResult:
    """Bracket the value of ``k`` where the classification changes side.

    Raises ``ValueError`` if both ends fall on the same side of
    ``predicate`` or either end is inconclusive.  An inconclusive midpoint
    stops the bisection; the current bracket is returned with the flag set.
    """
    if not tol_k >= K_TOL_FLOOR:
        raise ValueError(f"tol_k must be at least {K_TOL_FLOOR:g} (double-precision floor)")
    if not k_hi > k_lo:
        raise ValueError("need k_lo < k_hi")
    pred = _predicate(predicate)
    model, th = _resolve(model, params, thresholds)
    y0 = tuple(float(v) for v in (default_y0(model) if y0 is None else y0))
    cfg = cfg or HUNT_CFG
    eps = model.params.eps
    horizon = th.horizon / eps if horizon is None else float(horizon)
    transient = th.transient / eps if transient is None else float(transient)
    geo = branch_geometry(model) if model.name != "vanderpol" else None
    evals = []

    def side_at(k):
        c = classify(model.with_params(k=k), None, y0, horizon, transient=transient,
                     thresholds=th, cfg=cfg, geometry=geo)
        evals.append((k, c.label))
        log.debug("k=%.17g -> %s", k, c)
        return c, (None if c.inconclusive else pred.side(c.label))

    c_lo, s_lo = side_at(k_lo)
    c_hi, s_hi = side_at(k_hi)
    for c, s, k in ((c_lo, s_lo, k_lo), (c_hi, s_hi, k_hi)):
        if s is None:
            raise ValueError(f"classification at k={k!r} is {c} (outside {pred.name})")
    if s_lo == s_hi:
        raise ValueError(f"{pred.name} agrees at both ends ({c_lo.label}, {c_hi.label})")
    lo, hi = float(k_lo), float(k_hi)
    label_lo, label_hi = c_lo.label, c_hi.label
    flag, reason = False, ""
    while hi - lo > tol_k:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        c, s = side_at(mid)
        if s is None:
            flag, reason = True, f"inconclusive at k={mid!r}: {c}"
            break
        if s == s_lo:
            lo, label_lo = mid, c.label
        else:
            hi, label_hi = mid, c.label
    return TransitionResult(
        k_star=0.5 * (lo + hi), k_lo=lo, k_hi=hi, width=hi - lo, predicate=pred.name,
        label_lo=label_lo, label_hi=label_hi, model=model.name,
        params={n: getattr(model.params, n) for n in MODEL_PARAMETERS[model.name]},
        y0=y0, horizon=horizon, transient=transient, integrator=asdict(cfg),
        thresholds=asdict(th), inconclusive=flag, reason=reason, evaluations=evals)


# ----------------------------------------------------------------- sweep

def _sweep_point(args):
    model, k, y0, horizon, transient, th, cfg = args
    m = model.with_params(k=k)
    case = singular.classify_regime(m) if m.is_polar else None
    c = classify(m, None, y0, horizon, transient=transient, thresholds=th, cfg=cfg)
    return RegimeReport(k, case, c)


def sweep(model: ModelSpec, k_grid, params: dict | None = None, *, workers: int = 1, y0=None,
          horizon=None, transient=None, thresholds: Thresholds | None = None,
          cfg: IntegratorConfig | None = None) -> list:
    """Classify the full system at every ``k`` of ``k_grid`` next to its singular Case."""
    model, th = _resolve(model, params, thresholds)
    jobs = [(model, float(k), y0, horizon, transient, th, cfg) for k in k_grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


REGIME_COLUMNS = ("k", "case", "families", "label", "inconclusive", "env_min", "env_max",
                  "frac_quiet", "frac_spike", "n_alternations", "adherence_span", "mu_min", "mu_max",
                  "mu_limit")


def regime_rows(reports):
    for rep in reports:
        ev = rep.classification.evidence
        yield [repr(rep.k), rep.case.case if rep.case else "",
               ";".join(rep.case.families) if rep.case else "",
               rep.label, int(rep.classification.inconclusive)] + \
              [repr(ev[c]) if isinstance(ev.get(c), float) else ev.get(c, "") for c in REGIME_COLUMNS[5:]]


def write_regime_csv(reports, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(REGIME_COLUMNS)
        w.writerows(regime_rows(reports))
