"""Slow flow on the critical manifold and averaged slow flow on the cycle branch.

On the polar models the averaged slow equation reduces to closed forms along
``mu = r^4 - 2 r^2``:

    <mu'> = k - r^2 - alpha mu(r)

For Wilson-Cowan the average of ``k - x - y`` is taken numerically over one
period of the frozen-mu cycle.  The entry-exit map measures how far past the
Hopf point a trajectory on the critical manifold stays close to it: the exit
point balances the contraction accumulated before the Hopf point against the
expansion after it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import continuation as cont
from . import fastbif
from .models import ModelSpec, cycle_branch_mu, wc_average_field
from .ode import IntegratorConfig, integrate

__all__ = [
    "AvgSlowFlow",
    "BufferPoint",
    "BufferPointReached",
    "EntryExitMap",
    "avg_slow_rhs",
    "avg_slow_equilibria",
    "avg_slow_flow",
    "singular_canard_k",
    "entry_exit",
    "buffer_point",
    "slow_rhs_on_s0",
    "wc_cycle_average",
    "write_profile_csv",
]

STABLE = "stable"
UNSTABLE = "unstable"
DEGENERATE = "degenerate"

AVG_CFG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-13)


class BufferPointReached(ValueError):
    """The slow flow on the critical manifold stalls before leaving the delay region."""


@dataclass(frozen=True)
class BufferPoint:
    mu: float
    exists: bool
    degenerate: bool = False  # whole line r = 0 is stationary (canonical, k = 0)

    @property
    def location(self):
        return (0.0, self.mu)


@dataclass(frozen=True)
class EntryExitMap:
    model: ModelSpec
    mu_in: float
    mu_out: float
    k: float
    alpha: float


@dataclass(frozen=True)
class AvgSlowFlow:
    """Averaged slow right-hand side sampled along the fast cycle branch.

    ``domain`` is the radius for the polar models and the branch arclength in
    the ``(mu, amplitude)`` plane for Wilson-Cowan.
    """

    model: ModelSpec
    domain_name: str
    domain: np.ndarray
    mu: np.ndarray
    rhs: np.ndarray
    equilibria: tuple


def _k_alpha(model, k, alpha):
    k = model.params.k if k is None else float(k)
    if model.name == "canonical":
        a = 0.0 if alpha is None else float(alpha)
        if a != 0.0:
            raise ValueError("the canonical model has alpha = 0; use the leidenator")
    else:
        a = model.alpha if alpha is None else float(alpha)
    if a < 0:
        raise ValueError("alpha must be non-negative")
    return k, a


def _require_polar(model):
    if not model.is_polar:
        raise ValueError(f"closed-form averaging is for canonical/leidenator, not {model.name}")


# -------------------------------------------------------- averaged flow

def avg_slow_rhs(model: ModelSpec, point, k=None, alpha=None) -> float:
    """Averaged slow right-hand side ``<mu'>`` at a point of the cycle branch.

    Parameters
    ----------
    point : float or CycleRecord or array_like
        Radius ``r > 0`` for the polar models.  For Wilson-Cowan a
        :class:`~torcanard.fastbif.CycleRecord` or a state ``(x, y, mu)`` on a
        fast cycle.
    """
    if model.is_polar:
        k, a = _k_alpha(model, k, alpha)
        r = float(point)
        if not r > 0:
            raise ValueError("cycle-branch radius must be positive")
        return k - r * r - a * float(cycle_branch_mu(r))
    if model.name != "wilson-cowan":
        raise ValueError("van der Pol has no averaged slow subsystem")
    if k is not None:
        model = model.with_params(k=float(k))
    state = point.anchor if isinstance(point, fastbif.CycleRecord) else point
    return wc_cycle_average(model, state)


def wc_cycle_average(model: ModelSpec, state, closure_tol=1e-6) -> float:
    """Time-average of ``k - x - y`` over the frozen-mu cycle through ``state``.

    The period is the first return to the horizontal line through ``state``
    in the same crossing direction.  Raises ``ValueError`` if the orbit does
    not close to ``closure_tol``.
    """
    s = np.asarray(state, dtype=float)
    vf = wc_average_field(model)
    y0 = np.array([s[0], s[1], s[2], 0.0])
    direction = np.sign(vf(0.0, y0)[1])
    if direction == 0:
        raise ValueError("state lies where the flow is tangent to its section")
    t_end = 80.0
    while t_end < 5000.0:
        tr = integrate(vf, y0, (0.0, t_end), AVG_CFG)
        g = tr.states[:, 1] - s[1]
        for i in range(1, len(g) - 1):
            if np.sign(g[i]) != np.sign(g[i + 1]) and np.sign(g[i + 1] - g[i]) == direction:
                t_c = brentq(lambda t: tr.eval_in_step(i, t)[1] - s[1], tr.times[i], tr.times[i + 1],
                             xtol=1e-14, rtol=1e-15)
                end = tr.eval_in_step(i, t_c)
                if abs(end[0] - s[0]) > closure_tol:
                    raise ValueError(f"state is not on a fast cycle (return mismatch {abs(end[0] - s[0]):.2e})")
                return float(end[3] / t_c)
        t_end *= 2.0
    raise ValueError("no return to the section: state is not on a fast cycle")


def _branch_root_stability(r, a):
    # r' = g(r) / mu'(r) on the branch; sign of its derivative at a root of g
    dmu = 4.0 * r ** 3 - 4.0 * r
    dg = -2.0 * r - a * dmu
    if dmu == 0.0:
        return DEGENERATE
    return STABLE if dg / dmu < 0 else UNSTABLE


def avg_slow_equilibria(model: ModelSpec, k=None, alpha=None, branch=None) -> list:
    """Equilibria ``(r, mu, stability)`` of the averaged slow flow.

    Polar models: positive roots ``s = r^2`` of ``alpha s^2 + (1 - 2 alpha) s - k = 0``.
    Wilson-Cowan: sign changes of ``<mu'>`` along ``branch`` (computed when
    omitted), polished on the cycle branch; the first entry is then the cycle
    amplitude.
    """
    if model.name == "wilson-cowan":
        flow = avg_slow_flow(model, branch=branch, k=k)
        return list(flow.equilibria)
    _require_polar(model)
    k, a = _k_alpha(model, k, alpha)
    b = 1.0 - 2.0 * a
    if a == 0.0:
        roots = [k] if k > 0 else []
    else:
        disc = b * b + 4.0 * a * k
        if disc < 0:
            roots = []
        else:
            q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
            roots = [q / a, -k / q] if q != 0.0 else [-b / a]
    out = []
    for s in sorted(set(roots)):
        if s > 0:
            r = math.sqrt(s)
            out.append((r, float(cycle_branch_mu(r)), _branch_root_stability(r, a)))
    return out


def singular_canard_k(model: ModelSpec, alpha=None) -> float:
    """Value of ``k`` at which the averaged equilibrium sits on the cycle fold ``r = 1``."""
    _require_polar(model)
    _, a = _k_alpha(model, model.params.k, alpha)

    def r_eq_minus_fold(k):
        eqs = avg_slow_equilibria(model, k, a)
        return eqs[0][0] - 1.0

    return brentq(r_eq_minus_fold, 0.01, 10.0, xtol=1e-15, rtol=1e-15)


def avg_slow_flow(model: ModelSpec, *, n=400, r_max=None, branch=None, k=None, alpha=None) -> AvgSlowFlow:
    """Sampled ``<mu'>`` profile along the cycle branch with its equilibria."""
    if model.is_polar:
        k, a = _k_alpha(model, k, alpha)
        r_max = r_max or max(math.sqrt(2.0), 1.25 * math.sqrt(max(k, 0.0)) + 0.1)
        r = np.linspace(0.0, r_max, n + 1)[1:]
        mu = cycle_branch_mu(r)
        rhs = k - r * r - a * mu
        return AvgSlowFlow(model, "r", r, mu, rhs, tuple(avg_slow_equilibria(model, k, a)))
    if model.name != "wilson-cowan":
        raise ValueError("van der Pol has no averaged slow subsystem")
    if k is not None:
        model = model.with_params(k=float(k))
    branch = branch or fastbif.cycle_branch(model)
    mu = np.asarray(branch.mu)
    amp = np.asarray(branch.amplitude)
    s = np.r_[0.0, np.cumsum(np.hypot(np.diff(mu), np.diff(amp)))]
    rhs = np.array([wc_cycle_average(model, c.anchor) for c in branch.cycles])
    eqs = []
    for i in range(len(rhs) - 1):
        if rhs[i] * rhs[i + 1] < 0:
            eqs.append(_wc_polish_equilibrium(model, branch.cycles[i], branch.cycles[i + 1]))
    return AvgSlowFlow(model, "arclength", s, mu, rhs, tuple(eqs))


def _wc_polish_equilibrium(model, c0, c1):
    y_s = c0.anchor[1]
    reverse = c0.stability == fastbif.REPELLING
    rmap = fastbif._ReturnMap(model, y_s, reverse=reverse)

    def G(u):
        return np.array([rmap(u[0], u[1])[0] - u[0]])

    def J(u):
        return cont.fd_jacobian(G, u, h=1e-7)

    ua = np.array([c0.anchor[0], c0.mu])
    ub = np.array([c1.anchor[0], c1.mu])
    u = fastbif._refine_on_curve(G, J, ua, ub, lambda v: wc_cycle_average(model, (v[0], y_s, v[1])))
    rec = fastbif._cycle_record(rmap, u[0], u[1], fastbif._multiplier(rmap, u))
    # orientation: mu increases where <mu'> > 0; stable if <mu'> decreases along mu on the branch
    d_left = wc_cycle_average(model, c0.anchor)
    stab = STABLE if (d_left > 0) == (c0.mu < c1.mu) else UNSTABLE
    return (rec.amplitude, rec.mu, stab)


# ------------------------------------------------ slow flow on S0, delay

def slow_rhs_on_s0(model: ModelSpec, mu, k=None, alpha=None):
    """Slow speed ``mu'`` (slow time) on the branch ``r = 0`` of the polar models."""
    _require_polar(model)
    k, a = _k_alpha(model, k, alpha)
    return k - a * np.asarray(mu, dtype=float)


def buffer_point(model: ModelSpec, k=None, alpha=None) -> BufferPoint:
    """Equilibrium of the slow flow on ``r = 0``, which caps the Hopf delay."""
    _require_polar(model)
    k, a = _k_alpha(model, k, alpha)
    if a > 0:
        return BufferPoint(k / a, True)
    if k == 0.0:
        return BufferPoint(float("nan"), True, degenerate=True)
    return BufferPoint(float("nan"), False)


def entry_exit(model: ModelSpec, mu_in: float, k=None, alpha=None) -> float:
    """Exit point of a slow passage through the Hopf point entered at ``mu_in``.

    Solves ``int_{mu_in}^{mu_out} lambda(mu) / h0(mu) dmu = 0`` for ``mu_out``
    on the far side of the Hopf point, where ``lambda`` is the real part of
    the leading fast eigenvalue on the critical manifold and ``h0`` the slow
    speed.  For the polar models ``lambda = mu``, the Hopf point is ``mu = 0``
    and ``h0 = k - alpha mu``.  For Wilson-Cowan the branch through the
    right-most Hopf point is used and the passage may run towards smaller mu.

    Raises
    ------
    BufferPointReached
        The slow flow does not carry ``mu_in`` through the Hopf point (it
        stalls at the buffer point or runs the other way).
    """
    if model.name == "wilson-cowan":
        if k is not None:
            model = model.with_params(k=float(k))
        return _wc_entry_exit(model, float(mu_in))
    _require_polar(model)
    k, a = _k_alpha(model, k, alpha)
    mu_in = float(mu_in)
    if not mu_in < 0:
        raise ValueError("entry must lie on the attracting part mu < 0")
    if k - a * mu_in <= 0 or k <= 0:
        raise BufferPointReached(f"slow flow on r = 0 does not pass the Hopf point (k={k}, alpha={a})")
    lam_over_h = lambda m: m / (k - a * m)
    target = quad(lam_over_h, mu_in, 0.0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]  # < 0

    def balance(m):
        return target + quad(lam_over_h, 0.0, m, epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    if a > 0:
        # the integral diverges at the buffer point, so a bracket exists below it
        mu_b = k / a
        hi = 0.5 * mu_b
        while balance(hi) < 0:
            hi = 0.5 * (hi + mu_b)
            if mu_b - hi < 1e-12 * mu_b:
                raise BufferPointReached("exit not reached before the buffer point")
    else:
        hi = 2.0 * abs(mu_in) + 1.0
        while balance(hi) < 0:
            hi *= 2.0
    return brentq(balance, 0.0, hi, xtol=1e-15, rtol=1e-15)


def _wc_entry_exit(model, mu_in):
    hb = fastbif.rightmost_hopf(model)
    p = model.params

    def eq(m):
        return fastbif.equilibrium_at(model, m, hb.state)

    def lam(m):
        return float(np.max(np.linalg.eigvals(fastbif.fast_jacobian(model, eq(m))).real))

    def h0(m):
        e = eq(m)
        return p.k - e[0] - e[1]

    direction = math.copysign(1.0, h0(hb.mu))
    if (mu_in - hb.mu) * direction >= 0:
        raise ValueError("entry must lie before the Hopf point in the direction of the slow flow")
    if lam(mu_in) >= 0:
        raise ValueError("entry must lie on the attracting side of the Hopf point")
    f = lambda m: lam(m) / h0(m)
    target = quad(f, mu_in, hb.mu, epsabs=1e-13, epsrel=1e-12, limit=200)[0]

    def balance(m):
        return target + quad(f, hb.mu, m, epsabs=1e-13, epsrel=1e-12, limit=200)[0]

    step = abs(mu_in - hb.mu)
    far = hb.mu + direction * step
    for _ in range(40):
        try:
            if h0(far) * direction <= 0:
                raise BufferPointReached("slow flow stalls before the exit point")
            if balance(far) >= 0:
                break
        except cont.NewtonFailure as exc:
            raise BufferPointReached(f"critical manifold branch lost before exit: {exc}") from None
        far = hb.mu + direction * (abs(far - hb.mu) * 1.25)
    else:
        raise BufferPointReached("exit not found")
    a, b = sorted((hb.mu, far))
    return brentq(balance, a, b, xtol=1e-13, rtol=1e-15)


# ------------------------------------------------------------- export

def write_profile_csv(flow: AvgSlowFlow, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow((flow.domain_name, "mu", "avg_rhs"))
        for d, m, v in zip(flow.domain, flow.mu, flow.rhs):
            w.writerow((repr(float(d)), repr(float(m)), repr(float(v))))
