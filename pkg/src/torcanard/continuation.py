"""Pseudo-arclength continuation of one-dimensional solution curves ``G(u) = 0``."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


class NewtonFailure(RuntimeError):
    pass


def newton(G, J, u0, *, tol=1e-11, max_iter=12, extra=None):
    """Newton's method on ``G(u) = 0`` (square system).

    ``extra = (row, value)`` appends the linear condition ``row . u = value``
    to an underdetermined ``G``.
    """
    u = np.array(u0, dtype=float)
    for it in range(max_iter):
        g = np.atleast_1d(G(u))
        jac = np.atleast_2d(J(u))
        if extra is not None:
            row, value = extra
            g = np.append(g, row @ u - value)
            jac = np.vstack([jac, row])
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(jac)):
            raise NewtonFailure("non-finite residual")
        du = np.linalg.solve(jac, -g)
        u = u + du
        if np.linalg.norm(du) <= tol * (1.0 + np.linalg.norm(u)):
            return u, it + 1
    raise NewtonFailure(f"no convergence in {max_iter} iterations (|du|={np.linalg.norm(du):.2e})")


def tangent(J, u, previous=None):
    """Unit null vector of the ``(n-1) x n`` Jacobian at ``u``, oriented along ``previous``."""
    jac = np.atleast_2d(J(u))
    n = jac.shape[1]
    _, _, vt = np.linalg.svd(jac)
    t = vt[-1]
    if previous is not None and t @ previous < 0:
        t = -t
    return t / np.linalg.norm(t)


def fd_jacobian(G, u, h=1e-7):
    u = np.asarray(u, dtype=float)
    g0 = np.atleast_1d(G(u))
    jac = np.empty((g0.size, u.size))
    for j in range(u.size):
        step = h * max(1.0, abs(u[j]))
        up = u.copy()
        um = u.copy()
        up[j] += step
        um[j] -= step
        jac[:, j] = (np.atleast_1d(G(up)) - np.atleast_1d(G(um))) / (2.0 * step)
    return jac


def arclength(G, J, u0, t0, *, ds=0.01, ds_min=1e-6, ds_max=0.1, max_points=5000,
              stop=None, newton_tol=1e-11, on_accept=None):
    """Trace the curve through ``u0`` starting in direction ``t0``.

    ``stop(u)`` returning True ends the trace after ``u`` has been recorded.
    ``on_accept(u)`` is called for every accepted point (including ``u0``)
    before the next prediction, e.g. to switch between equivalent residuals.
    Returns ``(points, tangents, reason)``.
    """
    u = np.asarray(u0, dtype=float)
    if on_accept is not None:
        on_accept(u)
    t = tangent(J, u, np.asarray(t0, dtype=float))
    points, tangents = [u.copy()], [t.copy()]
    reason = "max-points"
    while len(points) < max_points:
        try:
            pred = u + ds * t
            u_new, iters = newton(G, J, pred, tol=newton_tol, extra=(t, t @ pred))
            t_new = tangent(J, u_new, t)
            if t_new @ t < 0.5:
                raise NewtonFailure("tangent turned too sharply")
        except (NewtonFailure, np.linalg.LinAlgError) as exc:
            ds *= 0.5
            if ds < ds_min:
                log.debug("continuation stopped at %s: %s", u, exc)
                reason = "branch-loss"
                break
            continue
        u, t = u_new, t_new
        if on_accept is not None:
            on_accept(u)
            t = tangent(J, u, t)
        points.append(u.copy())
        tangents.append(t.copy())
        if stop is not None and stop(u):
            reason = "stop"
            break
        if iters <= 3:
            ds = min(ds * 1.3, ds_max)
    return np.array(points), np.array(tangents), reason
