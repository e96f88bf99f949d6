"""Bifurcation structure of the fast subsystem (mu frozen).

For the polar models everything is closed-form: the critical manifold is the
line ``r = 0`` with a subcritical Hopf point at ``mu = 0`` and the cycles are
the circles on ``0 = mu + 2 r^2 - r^4`` with a saddle-node of cycles at
``(r, mu) = (1, -1)``.  For Wilson-Cowan the equilibria are continued by
pseudo-arclength and the cycles are fixed points of a return map on a
horizontal section, continued in the ``(crossing point, mu)`` plane.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import continuation as cont
from .models import ModelSpec, _param_vector, _sigmoid_slope, cycle_branch_mu, vector_field, wc_jacobian
from .ode import IntegratorConfig, integrate

log = logging.getLogger(__name__)

__all__ = [
    "SpecialPoint",
    "CycleRecord",
    "BranchCurve",
    "fast_jacobian",
    "critical_manifold",
    "cycle_branch",
    "sn_of_cycles",
    "rightmost_hopf",
    "find_cycle",
    "equilibrium_at",
    "write_branch_csv",
]

ATTRACTING = "attracting"
REPELLING = "repelling"

CYCLE_CFG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-13)


@dataclass(frozen=True)
class SpecialPoint:
    type: str  # "HB", "SN-of-cycles" or "fold-of-equilibria"
    mu: float
    state: np.ndarray


@dataclass(frozen=True)
class CycleRecord:
    mu: float
    period: float
    amplitude: float
    anchor: np.ndarray
    stability: str
    multiplier: float = float("nan")


@dataclass(frozen=True)
class BranchCurve:
    """A sampled family of fast-subsystem attractors/repellers in ``mu``.

    ``states`` holds Cartesian representative states ``(x, y, mu)`` (for
    cycles: the anchor point).  ``amplitude`` and ``period`` are zero/NaN for
    equilibria.
    """

    kind: str
    mu: np.ndarray
    states: np.ndarray
    stability: tuple
    special_points: tuple = ()
    amplitude: np.ndarray | None = None
    period: np.ndarray | None = None
    cycles: tuple = ()

    def __len__(self):
        return len(self.mu)

    def special(self, type_: str) -> list:
        return [sp for sp in self.special_points if sp.type == type_]


# ---------------------------------------------------------------- helpers

def fast_jacobian(model: ModelSpec, state) -> np.ndarray:
    """Jacobian of the fast subsystem with respect to the fast variables (Cartesian)."""
    s = np.asarray(state, dtype=float)
    if model.name == "vanderpol":
        return np.array([[1.0 - s[0] ** 2]])
    if model.name == "wilson-cowan":
        return wc_jacobian(model.params, s[0], s[1], s[2])
    x, y, mu = s
    r2 = x * x + y * y
    q = mu + 2.0 * r2 - r2 * r2
    dq = 4.0 - 4.0 * r2  # dq/dx = dq * x, dq/dy = dq * y
    return np.array([[q + dq * x * x, -1.0 + dq * x * y],
                     [1.0 + dq * x * y, q + dq * y * y]])


def _eq_residual(model):
    params = _param_vector(model, 0.0)
    vf = vector_field(model, "cartesian", "fast")
    p = model.params

    def G(u):
        out = np.empty(3)
        vf.kernel(0.0, u, params, out)
        return out[:2]

    def J(u):
        x, y, mu = u
        jac = wc_jacobian(p, x, y, mu)
        dmu = _sigmoid_slope("N_x", p.J_xx * x + p.J_xy * y + mu, p)
        return np.hstack([jac, [[dmu], [0.0]]])

    return G, J


def equilibrium_at(model: ModelSpec, mu: float, seed) -> np.ndarray:
    """Newton-polished fast equilibrium ``(x, y, mu)`` near ``seed`` at fixed ``mu``."""
    if model.is_polar:
        return np.array([0.0, 0.0, float(mu)])
    G, J = _eq_residual(model)
    u, _ = cont.newton(lambda v: G(np.append(v, mu)), lambda v: J(np.append(v, mu))[:, :2],
                       np.asarray(seed, dtype=float)[:2])
    return np.array([u[0], u[1], float(mu)])


def _stability(model, state) -> str:
    ev = np.linalg.eigvals(fast_jacobian(model, state))
    return ATTRACTING if np.max(ev.real) < 0 else REPELLING


def _refine_on_curve(G, J, ua, ub, test):
    """Root of ``test`` on the solution curve between samples ``ua`` and ``ub``."""
    d = (ub - ua) / np.linalg.norm(ub - ua)

    def point(s):
        lin = ua + s * (ub - ua)
        u, _ = cont.newton(G, J, lin, extra=(d, d @ lin))
        return u

    s = brentq(lambda s: test(point(s)), 0.0, 1.0, xtol=1e-14, rtol=1e-15)
    return point(s)


# ---------------------------------------------------- critical manifold

def critical_manifold(model: ModelSpec, mu_range=(-2.0, 2.0), step=0.01) -> BranchCurve:
    """Equilibria of the fast subsystem for ``mu`` in ``mu_range``.

    ``step`` is the mu-spacing for the polar models and the maximal
    arclength step for Wilson-Cowan.
    """
    lo, hi = map(float, mu_range)
    if not hi > lo:
        raise ValueError("empty mu range")
    if model.name == "vanderpol":
        return _vdp_manifold(lo, hi, step)
    if model.is_polar:
        return _polar_manifold(model, lo, hi, step)
    return _wc_manifold(model, lo, hi, step)


def _vdp_manifold(lo, hi, step):
    # S0 is the graph mu = x - x^3/3; parametrise by x over a range covering [lo, hi]
    xmax = 1.0
    while xmax - xmax ** 3 / 3.0 > lo or -xmax + xmax ** 3 / 3.0 < hi:
        xmax += 0.5
    x = np.arange(-xmax, xmax + step / 2, step)
    mu = x - x ** 3 / 3.0
    keep = (mu >= lo) & (mu <= hi)
    x, mu = x[keep], mu[keep]
    stab = tuple(ATTRACTING if abs(xi) > 1 else REPELLING for xi in x)
    sps = tuple(SpecialPoint("fold-of-equilibria", xf - xf ** 3 / 3.0, np.array([xf, xf - xf ** 3 / 3.0]))
                for xf in (-1.0, 1.0) if lo <= xf - xf ** 3 / 3.0 <= hi)
    return BranchCurve("equilibrium", mu, np.column_stack([x, mu]), stab, sps,
                       np.zeros_like(mu), np.full_like(mu, np.nan))


def _polar_manifold(model, lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    mu = lo + step * np.arange(n)
    states = np.column_stack([np.zeros(n), np.zeros(n), mu])
    stab = tuple(_stability(model, s) for s in states)
    sps = []
    if lo < 0.0 < hi or lo == 0.0 or hi == 0.0:
        trace = lambda m: np.trace(fast_jacobian(model, (0.0, 0.0, m)))
        if trace(lo) * trace(hi) <= 0:
            m_hb = brentq(trace, lo, hi, xtol=1e-15, rtol=1e-15)
            sps.append(SpecialPoint("HB", m_hb, np.array([0.0, 0.0, m_hb])))
    return BranchCurve("equilibrium", mu, states, stab, tuple(sps),
                       np.zeros(n), np.full(n, np.nan))


def _wc_seeds(model, mu):
    p = model.params
    found = []
    for x in np.linspace(0.02, p.lambda_x - 0.02, 25):
        for y in np.linspace(0.02, p.lambda_y - 0.02, 9):
            try:
                e = equilibrium_at(model, mu, (x, y))
            except (cont.NewtonFailure, np.linalg.LinAlgError):
                continue
            if not any(np.allclose(e, f, atol=1e-8) for f in found):
                found.append(e)
    if not found:
        raise cont.NewtonFailure(f"no fast equilibrium found at mu={mu}")
    return sorted(found, key=lambda e: e[0])


def _wc_manifold(model, lo, hi, step):
    G, J = _eq_residual(model)
    start = _wc_seeds(model, lo)[0]
    lam = model.params.lambda_x

    def stop(u):
        return u[2] > hi + step or not (0.0 < u[0] < lam)

    pts, _, reason = cont.arclength(G, J, start, np.array([1.0, 0.0, 0.0]), ds=step / 4,
                                    ds_max=step, ds_min=1e-9, max_points=200000, stop=stop)
    log.debug("critical manifold continuation ended: %s", reason)
    tr = np.array([np.trace(fast_jacobian(model, u)) for u in pts])
    det = np.array([np.linalg.det(fast_jacobian(model, u)) for u in pts])
    sps = []
    for i in range(len(pts) - 1):
        if tr[i] * tr[i + 1] < 0 and det[i] > 0 and det[i + 1] > 0:
            u = _refine_on_curve(G, J, pts[i], pts[i + 1], lambda v: np.trace(fast_jacobian(model, v)))
            sps.append(SpecialPoint("HB", float(u[2]), u))
        if det[i] * det[i + 1] < 0:
            u = _refine_on_curve(G, J, pts[i], pts[i + 1], lambda v: np.linalg.det(fast_jacobian(model, v)))
            sps.append(SpecialPoint("fold-of-equilibria", float(u[2]), u))
    keep = (pts[:, 2] >= lo) & (pts[:, 2] <= hi)
    pts = pts[keep]
    sps = [sp for sp in sps if lo <= sp.mu <= hi]
    stab = tuple(_stability(model, u) for u in pts)
    n = len(pts)
    return BranchCurve("equilibrium", pts[:, 2].copy(), pts, stab, tuple(sps),
                       np.zeros(n), np.full(n, np.nan))


def rightmost_hopf(model: ModelSpec, mu_range=None) -> SpecialPoint:
    """Hopf point of the fast subsystem with the largest ``mu``."""
    if model.is_polar:
        return SpecialPoint("HB", 0.0, np.zeros(3))
    if model.name != "wilson-cowan":
        raise ValueError(f"{model.name} has no Hopf point in its fast subsystem")
    mu_range = mu_range or (-8.0, 0.0)
    hbs = critical_manifold(model, mu_range, step=0.02).special("HB")
    if not hbs:
        raise ValueError("no Hopf point in range")
    return max(hbs, key=lambda sp: sp.mu)


# ----------------------------------------------------------- cycles

def _polar_cycle(model, r):
    mu = float(cycle_branch_mu(r))
    stab = ATTRACTING if r > 1.0 else REPELLING
    # nontrivial multiplier exp(2 pi d/dr[r(mu + 2r^2 - r^4)]) on the circle
    mult = math.exp(2.0 * math.pi * (4.0 * r * r - 4.0 * r ** 4))
    return CycleRecord(mu, 2.0 * math.pi, float(r), np.array([float(r), 0.0, mu]), stab, mult)


def _polar_cycle_branch(model, lo, hi, n):
    if hi <= -1.0:
        raise ValueError("no fast cycles below the saddle-node mu = -1")
    r_max = math.sqrt(1.0 + math.sqrt(1.0 + hi))
    r = np.linspace(0.0, r_max, n + 1)[1:]
    mu = cycle_branch_mu(r)
    # r_max maps to hi up to rounding
    keep = (mu >= lo) & (mu <= hi + 1e-12)
    r, mu = r[keep], np.minimum(mu[keep], hi)
    cyc = tuple(_polar_cycle(model, ri) for ri in r)
    stab = tuple(c.stability for c in cyc)
    sps = []
    r_sn = brentq(lambda s: 4.0 * s ** 3 - 4.0 * s, 0.5, 1.5, xtol=1e-16, rtol=1e-15)
    mu_sn = float(cycle_branch_mu(r_sn))
    if lo <= mu_sn <= hi and r[0] < r_sn < r[-1]:
        sps.append(SpecialPoint("SN-of-cycles", mu_sn, np.array([r_sn, 0.0, mu_sn])))
    if lo <= 0.0 <= hi:
        sps.insert(0, SpecialPoint("HB", 0.0, np.zeros(3)))
    return BranchCurve("cycle", mu, np.array([c.anchor for c in cyc]), stab, tuple(sps),
                       r.copy(), np.full(len(r), 2.0 * math.pi), cyc)


class _ReturnMap:
    """Return map of the frozen-mu Wilson-Cowan fast flow on ``y = y_s``.

    Points are parametrised by their ``x`` coordinate; the section is crossed
    in the direction of increasing ``y``.
    """

    def __init__(self, model, y_s, cfg=CYCLE_CFG, reverse=False, t_max=2000.0):
        self.model = model
        self.y_s = float(y_s)
        self.cfg = cfg
        self.vf = vector_field(model, "cartesian", "fast")
        if reverse:
            self.vf = self.vf.reversed()
        self.t_max = t_max

    def orbit(self, x0, mu):
        y0 = np.array([x0, self.y_s, mu])
        direction = np.sign(self.vf(0.0, y0)[1])
        if direction == 0:
            raise cont.NewtonFailure("section tangent to the flow")
        t_end = 60.0
        while True:
            tr = integrate(self.vf, y0, (0.0, t_end), self.cfg)
            g = tr.states[1:, 1] - self.y_s
            prev = tr.states[:-1, 1] - self.y_s
            idx = np.nonzero((np.sign(prev) != np.sign(g)) & (np.sign(g) == direction)
                             & (np.arange(len(g)) > 0))[0]
            if len(idx):
                i = int(idx[0])
                t_c = brentq(lambda t: tr.eval_in_step(i, t)[1] - self.y_s, tr.times[i], tr.times[i + 1],
                             xtol=1e-14, rtol=1e-15)
                return tr, t_c, tr.eval_in_step(i, t_c)
            if t_end >= self.t_max:
                raise cont.NewtonFailure("no return to the section")
            t_end *= 2.0

    def __call__(self, x0, mu):
        _, t_c, y_c = self.orbit(x0, mu)
        return y_c[0], t_c


def _cycle_record(rmap: _ReturnMap, x0, mu, multiplier):
    tr, period, _ = rmap.orbit(x0, mu)
    xs = [tr.states[0, 0]]
    for i in range(len(tr.times) - 1):
        t_a, t_b = tr.times[i], min(tr.times[i + 1], period)
        if t_a >= period:
            break
        for th in np.linspace(0, 1, 9)[1:]:
            xs.append(tr.eval_in_step(i, t_a + th * (t_b - t_a))[0])
    xs = np.array(xs)
    amp = 0.5 * (xs.max() - xs.min())
    # reversed-time search: stability refers to forward time
    fwd_mult = multiplier if rmap.vf.time_sign > 0 else 1.0 / multiplier
    stab = ATTRACTING if abs(fwd_mult) < 1.0 else REPELLING
    return CycleRecord(float(mu), float(period), float(amp), np.array([x0, rmap.y_s, mu]), stab, float(fwd_mult))


def find_cycle(model: ModelSpec, mu: float, seed, *, y_section=None, reverse=False,
               transient=3000.0, cfg=CYCLE_CFG) -> CycleRecord:
    """Locate a fast-subsystem cycle at fixed ``mu``.

    Integrates from ``seed`` (forward, or in reversed time to reach a
    repelling cycle), then polishes the section crossing by Newton on the
    return map.  The section is ``y = y_section`` (default: ``y`` of the fast
    equilibrium nearest to the seed).
    """
    if model.name != "wilson-cowan":
        raise ValueError("numerical cycle search is for wilson-cowan; polar cycles are closed-form")
    vf = vector_field(model, "cartesian", "fast")
    if reverse:
        vf = vf.reversed()
    seed = np.array([seed[0], seed[1], mu], dtype=float)
    tr = integrate(vf, seed, (0.0, transient), cfg, dense=False)
    end = tr.states[-1]
    if y_section is None:
        y_section = equilibrium_at(model, mu, end)[1]
    rmap = _ReturnMap(model, y_section, cfg, reverse)
    # run on to the first crossing of the section in the return direction
    tr2 = integrate(vf, end, (0.0, 500.0), cfg)
    g = tr2.states[:, 1] - y_section
    crossings = [i for i in range(len(g) - 1) if g[i] < 0 <= g[i + 1]]
    if not crossings:
        raise cont.NewtonFailure(f"orbit does not cross y={y_section:.6g}: no cycle around the equilibrium")
    i = crossings[0]
    t_c = brentq(lambda t: tr2.eval_in_step(i, t)[1] - y_section, tr2.times[i], tr2.times[i + 1], xtol=1e-14)
    x0 = tr2.eval_in_step(i, t_c)[0]
    x0, mult = _polish(rmap, x0, mu)
    return _cycle_record(rmap, x0, mu, mult)


def _polish(rmap, x0, mu, tol=1e-12):
    h = 1e-7
    for _ in range(20):
        p0, _ = rmap(x0, mu)
        dp = (rmap(x0 + h, mu)[0] - rmap(x0 - h, mu)[0]) / (2 * h)
        dx = -(p0 - x0) / (dp - 1.0)
        x0 += dx
        if abs(dx) < tol * (1 + abs(x0)):
            dp = (rmap(x0 + h, mu)[0] - rmap(x0 - h, mu)[0]) / (2 * h)
            return x0, dp
    raise cont.NewtonFailure("return-map Newton did not converge")


def cycle_branch(model: ModelSpec, mu_range=None, *, n=1000, amp_min=2e-3, ds_max=0.02) -> BranchCurve:
    """Family of fast-subsystem limit cycles over ``mu_range``.

    Polar models: exact parametrisation ``mu = r^4 - 2 r^2`` sampled at ``n``
    radii.  Wilson-Cowan: continuation from the stable cycle next to the
    right-most Hopf point, across the saddle-node of cycles and down the
    repelling branch until the amplitude drops below ``amp_min``.
    """
    if model.name == "vanderpol":
        raise ValueError("the van der Pol fast subsystem is one-dimensional: no cycles")
    if model.is_polar:
        lo, hi = mu_range or (-1.0, 0.0)
        return _polar_cycle_branch(model, float(lo), float(hi), n)
    return _wc_cycle_branch(model, mu_range, amp_min, ds_max)


def _wc_cycle_branch(model, mu_range, amp_min, ds_max):
    hb = rightmost_hopf(model)
    lo, hi = mu_range or (hb.mu - 0.25, hb.mu + 0.5)
    y_s = hb.state[1]
    # forward and reversed-time maps share their fixed points; the one that
    # contracts near the current cycle is used, so Newton stays well conditioned
    fwd = _ReturnMap(model, y_s)
    rev = _ReturnMap(model, y_s, reverse=True)
    active = {"map": fwd}
    for dmu in (-0.05, 0.05):
        mu0 = hb.mu + dmu
        eq = equilibrium_at(model, mu0, hb.state)
        if _stability(model, eq) == REPELLING:
            break
    else:
        raise ValueError("equilibrium stable on both sides of the Hopf point")
    start = find_cycle(model, mu0, eq[:2] + np.array([1e-3, 0.0]), y_section=y_s)

    def G(u):
        return np.array([active["map"](u[0], u[1])[0] - u[0]])

    def J(u):
        return cont.fd_jacobian(G, u, h=1e-7)

    def pick_map(u):
        if abs(_multiplier(active["map"], u)) > 1.0:
            active["map"] = rev if active["map"] is fwd else fwd

    def amplitude_of(u):
        # only needed near the Hopf point, where the equilibrium seed is good
        try:
            eq = equilibrium_at(model, u[1], hb.state)
        except cont.NewtonFailure:
            return math.inf
        return u[0] - eq[0]

    def stop(u):
        return not (lo <= u[1] <= hi) or amplitude_of(u) < amp_min

    u0 = np.array([start.anchor[0], mu0])
    legs = []
    for sgn in (1.0, -1.0):
        active["map"] = fwd
        pts, tans, reason = cont.arclength(G, J, u0, np.array([0.0, sgn * np.sign(-dmu)]), ds=ds_max / 4,
                                           ds_max=ds_max, ds_min=1e-7, max_points=4000, stop=stop,
                                           newton_tol=1e-10, on_accept=pick_map)
        log.debug("cycle continuation (%+d) ended: %s after %d points", sgn, reason, len(pts))
        legs.append((pts, tans))
    # order along the branch: reverse the second leg and join at the start point
    pts = np.vstack([legs[1][0][::-1], legs[0][0][1:]])
    tans = np.vstack([-legs[1][1][::-1], legs[0][1][1:]])
    # a leg that dies at a tangency of the section piles up near-identical points
    distinct = np.r_[True, np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-8]
    pts, tans = pts[distinct], tans[distinct]
    keep = (pts[:, 1] >= lo) & (pts[:, 1] <= hi) & np.array([amplitude_of(u) >= amp_min for u in pts])
    records = []
    for u in pts[keep]:
        rmap = fwd
        mult = _multiplier(fwd, u)
        if abs(mult) > 1.0:
            rmap, mult = rev, _multiplier(rev, u)
        records.append(_cycle_record(rmap, u[0], u[1], mult))
    sps = []
    mu_t = tans[:, 1]

    def G_fwd(u):
        return np.array([fwd(u[0], u[1])[0] - u[0]])

    def J_fwd(u):
        return cont.fd_jacobian(G_fwd, u, h=1e-7)

    for i in range(len(pts) - 1):
        if mu_t[i] * mu_t[i + 1] < 0 and keep[i] and keep[i + 1]:
            if (_multiplier(fwd, pts[i]) - 1.0) * (_multiplier(fwd, pts[i + 1]) - 1.0) > 0:
                continue
            u = _refine_on_curve(G_fwd, J_fwd, pts[i], pts[i + 1], lambda v: _multiplier(fwd, v) - 1.0)
            sps.append(SpecialPoint("SN-of-cycles", float(u[1]), np.array([u[0], y_s, u[1]])))
    if lo <= hb.mu <= hi:
        sps.append(SpecialPoint("HB", hb.mu, hb.state))
    mu = np.array([r.mu for r in records])
    return BranchCurve("cycle", mu, np.array([r.anchor for r in records]),
                       tuple(r.stability for r in records), tuple(sps),
                       np.array([r.amplitude for r in records]), np.array([r.period for r in records]),
                       tuple(records))


def _multiplier(rmap, u, h=1e-7):
    return (rmap(u[0] + h, u[1])[0] - rmap(u[0] - h, u[1])[0]) / (2 * h)


def sn_of_cycles(model: ModelSpec, branch: BranchCurve | None = None):
    """Saddle-node (fold) of the fast cycle branch: ``(mu_SN, CycleRecord)``."""
    if model.is_polar:
        r_sn = brentq(lambda s: 4.0 * s ** 3 - 4.0 * s, 0.5, 1.5, xtol=1e-16, rtol=1e-15)
        rec = _polar_cycle(model, r_sn)
        return rec.mu, CycleRecord(rec.mu, rec.period, rec.amplitude, rec.anchor, "fold", 1.0)
    branch = branch or cycle_branch(model)
    sns = branch.special("SN-of-cycles")
    if not sns:
        raise ValueError("no saddle-node of cycles in range")
    sp = sns[0]
    rmap = _ReturnMap(model, sp.state[1])
    rec = _cycle_record(rmap, sp.state[0], sp.mu, 1.0)
    return sp.mu, CycleRecord(rec.mu, rec.period, rec.amplitude, rec.anchor, "fold", 1.0)


# ------------------------------------------------------------- export

BRANCH_COLUMNS = ("kind", "mu", "amplitude", "period", "stability", "special_point_flag")


def branch_rows(branch: BranchCurve):
    """Rows in export order; special points are interleaved by arclength position."""
    rows = []
    for i in range(len(branch)):
        amp = 0.0 if branch.amplitude is None else float(branch.amplitude[i])
        per = float("nan") if branch.period is None else float(branch.period[i])
        rows.append([branch.kind, float(branch.mu[i]), amp, per, branch.stability[i], ""])
    for sp in branch.special_points:
        # place after the nearest sample in mu-state distance
        d = np.linalg.norm(branch.states[:, -len(sp.state):] - sp.state, axis=1) if len(branch) else []
        j = int(np.argmin(d)) + 1 if len(d) else 0
        amp = 0.0
        if branch.kind == "cycle" and len(branch):
            amp = float(branch.amplitude[j - 1])
        rows.insert(j, [branch.kind, float(sp.mu), amp, float("nan"), "", sp.type])
    return rows


def write_branch_csv(branch: BranchCurve, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(BRANCH_COLUMNS)
        for row in branch_rows(branch):
            w.writerow([row[0]] + [repr(v) if isinstance(v, float) else v for v in row[1:]])
