"""Adaptive initial-value integration with dense output and event location.

All solvers in the package go through :func:`integrate`, which wraps a
Dormand-Prince 5(4) pair with its fourth-order continuous extension.  Vector
fields are either :class:`VectorField` objects (numba-compiled kernels, the
fast path) or plain callables ``f(t, y) -> dy``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _dopri

__all__ = [
    "IntegratorConfig",
    "VectorField",
    "Trajectory",
    "IntegrationError",
    "StepLimitError",
    "NonFiniteStateError",
    "DenseOutputUnavailable",
    "integrate",
    "locate_event",
    "dense_eval",
]


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and limits for :func:`integrate`."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = np.inf
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if not self.max_step > 0:
            raise ValueError(f"max_step must be positive, got {self.max_step}")
        if int(self.max_steps) < 1:
            raise ValueError(f"max_steps must be a positive integer, got {self.max_steps}")

    def halved(self) -> "IntegratorConfig":
        return IntegratorConfig(self.rel_tol / 2, self.abs_tol / 2, self.max_step, self.max_steps)


@dataclass(frozen=True)
class VectorField:
    """A compiled right-hand side ``kernel(t, y, params, out)``.

    ``time_sign=-1`` integrates the reversed flow: the trajectory is then
    parametrised by reversed time ``s = -t`` (its times still increase).
    """

    kernel: Callable
    params: np.ndarray
    dim: int
    name: str = ""
    time_sign: float = 1.0

    def __call__(self, t, y):
        out = np.empty(self.dim)
        self.kernel(float(t), np.asarray(y, dtype=float), self.params, out)
        return self.time_sign * out

    def reversed(self) -> "VectorField":
        return VectorField(self.kernel, self.params, self.dim, self.name, -self.time_sign)


class IntegrationError(RuntimeError):
    """Integration stopped early; ``trajectory`` holds the accepted part."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepLimitError(IntegrationError):
    pass


class NonFiniteStateError(IntegrationError):
    pass


class DenseOutputUnavailable(RuntimeError):
    pass


@dataclass
class Trajectory:
    """Accepted integration steps with optional per-step interpolants."""

    times: np.ndarray
    states: np.ndarray
    cont: np.ndarray | None = None
    events: list = field(default_factory=list)
    status: str = "ok"
    n_accepted: int = 0
    n_rejected: int = 0

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def has_dense(self) -> bool:
        return self.cont is not None and len(self.cont) == len(self.times) - 1

    def __call__(self, t):
        return dense_eval(self, t)

    def _step_index(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(i, 0), len(self.times) - 2)

    def eval_in_step(self, i: int, t: float) -> np.ndarray:
        t_a, t_b = self.times[i], self.times[i + 1]
        if t == t_a:
            return self.states[i].copy()
        if t == t_b:
            return self.states[i + 1].copy()
        return _dopri.eval_cont(self.cont[i], (t - t_a) / (t_b - t_a))


def _kernel_of(f):
    if isinstance(f, VectorField):
        return f.kernel, f.params, f.time_sign, True

    def kernel(t, y, p, out):
        out[:] = f(t, y)

    return kernel, np.empty(0), 1.0, False


def integrate(f, y0, t_span, cfg: IntegratorConfig | None = None, *, dense: bool = True,
              events: Sequence[tuple] = ()) -> Trajectory:
    """Integrate ``y' = f(t, y)`` over ``t_span = (t0, t1)``.

    Parameters
    ----------
    f : VectorField or callable
        Right-hand side.  Plain callables run through the uncompiled loop.
    y0 : array_like
        Initial state; reproduced exactly as ``states[0]``.
    t_span : (float, float)
        Integration interval, ``t1 > t0``.
    cfg : IntegratorConfig, optional
    dense : bool
        Keep per-step interpolants (needed by :func:`dense_eval` and
        :func:`locate_event`).  Long runs that only need samples can turn it
        off to save memory.
    events : sequence of ``(event_id, event_fn, direction)``
        Located after the run and stored in ``Trajectory.events``.

    Raises
    ------
    StepLimitError
        ``cfg.max_steps`` exhausted.
    NonFiniteStateError
        The solution left the finite floating-point range.
    """
    cfg = cfg or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"empty or reversed time span {t_span!r}")
    y0 = np.array(y0, dtype=float).ravel()
    kernel, params, sign, compiled = _kernel_of(f)
    runner = _dopri.run if compiled else _dopri.run.py_func
    ts, ys, cont, status, nacc, nrej = runner(
        kernel, t0, y0, t1, params, float(cfg.rel_tol), float(cfg.abs_tol),
        float(cfg.max_step), int(cfg.max_steps), float(sign), bool(dense))
    traj = Trajectory(np.array(ts), np.array(ys), np.array(cont) if dense else None,
                      n_accepted=int(nacc), n_rejected=int(nrej))
    if status == _dopri.MAX_STEPS:
        traj.status = "max-steps"
        raise StepLimitError(f"step limit {cfg.max_steps} reached at t={traj.t1:.6g}", traj)
    if status in (_dopri.NONFINITE, _dopri.STEP_UNDERFLOW):
        traj.status = "non-finite"
        raise NonFiniteStateError(f"non-finite state near t={traj.t1:.6g}", traj)
    for event_id, fn, direction in events:
        for t, y in locate_event(traj, fn, direction):
            traj.events.append((t, event_id, y))
    traj.events.sort(key=lambda e: e[0])
    return traj


def dense_eval(traj: Trajectory, t: float) -> np.ndarray:
    """State at time ``t`` from the step interpolants (exact at samples)."""
    if not traj.has_dense:
        raise DenseOutputUnavailable("trajectory was integrated without dense output")
    t = float(t)
    if t < traj.times[0] or t > traj.times[-1]:
        raise ValueError(f"t={t} outside [{traj.t0}, {traj.t1}]")
    if len(traj.times) == 1:
        return traj.states[0].copy()
    return traj.eval_in_step(traj._step_index(t), t)


_DIRECTIONS = {"up": 1, "down": -1, "any": 0}


def locate_event(traj: Trajectory, event_fn: Callable, direction: str = "any"):
    """Zero crossings of ``event_fn(t, y)`` along a trajectory.

    Crossings are bracketed on the step samples and refined on the step
    interpolant to ``1e-12 * span`` in time.  Returns a list of ``(t, y)``.
    """
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {sorted(_DIRECTIONS)}")
    if not traj.has_dense:
        raise DenseOutputUnavailable("event location needs dense output")
    want = _DIRECTIONS[direction]
    ts = traj.times
    g = np.array([event_fn(t, y) for t, y in zip(ts, traj.states)], dtype=float)
    xtol = 1e-12 * max(traj.t1 - traj.t0, np.finfo(float).tiny)
    found = []
    for i in range(len(ts) - 1):
        ga, gb = g[i], g[i + 1]
        if ga == 0.0:
            # a sample exactly on the surface counts once, as the start of a crossing
            if i == 0:
                continue
            prev = g[i - 1]
            sgn = np.sign(gb) - np.sign(prev)
            if prev != 0.0 and gb != 0.0 and np.sign(prev) != np.sign(gb):
                if want == 0 or np.sign(sgn) == want:
                    found.append((float(ts[i]), traj.states[i].copy()))
            continue
        if gb == 0.0 or np.sign(ga) == np.sign(gb):
            continue
        sgn = 1 if gb > ga else -1
        if want and sgn != want:
            continue

        def h(t, i=i):
            return event_fn(t, traj.eval_in_step(i, t))

        t_root = brentq(h, ts[i], ts[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
        found.append((float(t_root), traj.eval_in_step(i, t_root)))
    return found
