"""The four slow-fast systems and their singular subsystems.

Models
------
``vanderpol``
    ``x' = x - x^3/3 - mu``, ``mu' = eps (x - a)``.
``canonical``
    canonical elliptic burster, Cartesian ``(x, y, mu)`` or polar
    ``(r, theta, mu)`` with ``r' = r (mu + 2 r^2 - r^4)``, ``theta' = 1``,
    ``mu' = eps (k - r^2)``.
``leidenator``
    as ``canonical`` with ``mu' = eps (k - r^2 - alpha mu)``.
``wilson-cowan``
    excitatory/inhibitory rate model with a slow adaptation variable ``mu``
    (``z`` on some figure axes), ``mu' = eps (k - x - y)``.

States are always ``(fast..., mu)``; the slow variable is the last component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from numba import njit
from scipy.special import erf

from .ode import VectorField

__all__ = [
    "ParamSet",
    "ModelSpec",
    "MODEL_NAMES",
    "SUBSYSTEM_KINDS",
    "FIG1_WILSON_COWAN",
    "make_model",
    "rhs",
    "sigmoid",
    "polar_to_cartesian",
    "cartesian_to_polar",
    "vector_field",
    "wc_jacobian",
]

MODEL_NAMES = ("vanderpol", "canonical", "leidenator", "wilson-cowan")
SUBSYSTEM_KINDS = ("full-fast-time", "full-slow-time", "fast", "slow", "averaged-slow")

# parameter values of the Wilson-Cowan bursting example (k = 2.56, eps = 1e-3)
FIG1_WILSON_COWAN = dict(
    J_xx=12.0, J_xy=-4.0, J_yx=13.0, J_yy=-9.0, delta=0.05, eps=0.001, rho=-1.1,
    g1=0.19, g2=0.4, sigma_x=1.001, sigma_y=1.001, lambda_x=2.0, lambda_y=8.5, k=2.56,
)


@dataclass(frozen=True)
class ParamSet:
    eps: float = 0.001
    k: float = 0.0
    alpha: float = 0.0
    a: float = 0.0
    J_xx: float = 12.0
    J_xy: float = -4.0
    J_yx: float = 13.0
    J_yy: float = -9.0
    delta: float = 0.05
    rho: float = -1.1
    g1: float = 0.19
    g2: float = 0.4
    sigma_x: float = 1.001
    sigma_y: float = 1.001
    lambda_x: float = 2.0
    lambda_y: float = 8.5

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"parameter {f.name} must be a finite real, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        for name in ("sigma_x", "sigma_y", "lambda_x", "lambda_y"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    def replace(self, **changes) -> "ParamSet":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_MODEL_DEFAULTS = {
    "vanderpol": dict(eps=0.01, a=0.0),
    "canonical": dict(eps=0.001, k=1.0),
    "leidenator": dict(eps=0.001, k=0.8, alpha=0.2),
    "wilson-cowan": dict(FIG1_WILSON_COWAN),
}

# parameters each model actually reads; the rest of a ParamSet is inert
MODEL_PARAMETERS = {
    "vanderpol": ("eps", "a"),
    "canonical": ("eps", "k"),
    "leidenator": ("eps", "k", "alpha"),
    "wilson-cowan": ("eps", "k", "J_xx", "J_xy", "J_yx", "J_yy", "delta", "rho",
                     "g1", "g2", "sigma_x", "sigma_y", "lambda_x", "lambda_y"),
}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: ParamSet = field(default_factory=ParamSet)

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ValueError(f"unknown model {self.name!r}; expected one of {MODEL_NAMES}")

    @property
    def dim_fast(self) -> int:
        return 1 if self.name == "vanderpol" else 2

    @property
    def dim_slow(self) -> int:
        return 1

    @property
    def dim(self) -> int:
        return self.dim_fast + self.dim_slow

    @property
    def forms(self) -> tuple:
        if self.name in ("canonical", "leidenator"):
            return ("cartesian", "polar")
        return ("cartesian",)

    @property
    def kinds(self) -> tuple:
        if self.name == "vanderpol":
            return SUBSYSTEM_KINDS[:4]
        return SUBSYSTEM_KINDS

    @property
    def is_polar(self) -> bool:
        return "polar" in self.forms

    @property
    def alpha(self) -> float:
        # canonical ignores alpha: it is the alpha = 0 member of the leidenator family
        return self.params.alpha if self.name == "leidenator" else 0.0

    def with_params(self, **changes) -> "ModelSpec":
        return ModelSpec(self.name, self.params.replace(**changes))


def make_model(name: str, **params) -> ModelSpec:
    """Model ``name`` with its default parameters overridden by ``params``."""
    if name not in _MODEL_DEFAULTS:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    unknown = set(params) - set(ParamSet.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}")
    values = dict(_MODEL_DEFAULTS[name])
    values.update(params)
    return ModelSpec(name, ParamSet(**values))


# ---------------------------------------------------------------- kernels
# parameter vectors:
#   vanderpol  [eps, a]
#   polar/cart [eps, k, alpha]
#   wc         [eps, k, Jxx, Jxy, Jyx, Jyy, delta, rho, cx, cy, lx, ly]
# with cx = g1 / sqrt(2 (1 + g1^2 sigma_x^2)) (likewise cy) pre-computed.

@njit(cache=True)
def _vdp_kernel(t, s, p, out):
    x = s[0]
    mu = s[1]
    out[0] = x - x * x * x / 3.0 - mu
    out[1] = p[0] * (x - p[1])


@njit(cache=True)
def _polar_kernel(t, s, p, out):
    r = s[0]
    mu = s[2]
    r2 = r * r
    out[0] = r * (mu + 2.0 * r2 - r2 * r2)
    out[1] = 1.0
    out[2] = p[0] * (p[1] - r2 - p[2] * mu)


@njit(cache=True)
def _logpolar_kernel(t, s, p, out):
    # s = (log r, theta, mu); exact reformulation of the polar field for r > 0
    mu = s[2]
    r2 = math.exp(2.0 * s[0])
    out[0] = mu + 2.0 * r2 - r2 * r2
    out[1] = 1.0
    out[2] = p[0] * (p[1] - r2 - p[2] * mu)


@njit(cache=True)
def _cart_kernel(t, s, p, out):
    x = s[0]
    y = s[1]
    mu = s[2]
    r2 = x * x + y * y
    q = mu + 2.0 * r2 - r2 * r2
    out[0] = -y + x * q
    out[1] = x + y * q
    out[2] = p[0] * (p[1] - r2 - p[2] * mu)


@njit(cache=True)
def _wc_kernel(t, s, p, out):
    x = s[0]
    y = s[1]
    mu = s[2]
    ux = p[2] * x + p[3] * y + mu
    uy = p[4] * x + p[5] * y + p[7]
    out[0] = -x + 0.5 * p[10] * (1.0 + math.erf(p[8] * ux))
    out[1] = p[6] * (-y + 0.5 * p[11] * (1.0 + math.erf(p[9] * uy)))
    out[2] = p[0] * (p[1] - x - y)


@njit(cache=True)
def _wc_avg_kernel(t, s, p, out):
    # frozen-mu fast subsystem plus a quadrature channel for the slow rhs
    _wc_kernel(t, s, p, out)
    out[2] = 0.0
    out[3] = p[1] - s[0] - s[1]


def _erf_scale(g, sigma):
    return g / math.sqrt(2.0 * (1.0 + g * g * sigma * sigma))


def _param_vector(model: ModelSpec, eps: float | None = None) -> np.ndarray:
    p = model.params
    e = p.eps if eps is None else eps
    if model.name == "vanderpol":
        return np.array([e, p.a])
    if model.is_polar:
        return np.array([e, p.k, model.alpha])
    return np.array([e, p.k, p.J_xx, p.J_xy, p.J_yx, p.J_yy, p.delta, p.rho,
                     _erf_scale(p.g1, p.sigma_x), _erf_scale(p.g2, p.sigma_y),
                     p.lambda_x, p.lambda_y])


def vector_field(model: ModelSpec, form: str = "cartesian", kind: str = "full-fast-time",
                 *, log_radius: bool = False) -> VectorField:
    """Compiled vector field for integration.

    ``kind`` is ``"full-fast-time"`` or ``"fast"`` (mu frozen).  With
    ``log_radius`` the polar form is expressed in ``(log r, theta, mu)``,
    which keeps exponentially small radii representable during slow
    passages along ``r = 0``.
    """
    _check_form(model, form)
    if kind not in ("full-fast-time", "fast"):
        raise ValueError(f"no integrable vector field for kind {kind!r}")
    eps = 0.0 if kind == "fast" else None
    params = _param_vector(model, eps)
    if model.name == "vanderpol":
        kernel = _vdp_kernel
    elif model.name == "wilson-cowan":
        kernel = _wc_kernel
    elif form == "polar":
        kernel = _logpolar_kernel if log_radius else _polar_kernel
    else:
        if log_radius:
            raise ValueError("log_radius applies to the polar form only")
        kernel = _cart_kernel
    return VectorField(kernel, params, model.dim, f"{model.name}/{form}/{kind}")


def wc_average_field(model: ModelSpec) -> VectorField:
    """Frozen-mu Wilson-Cowan field with a fourth channel accumulating ``k - x - y``."""
    if model.name != "wilson-cowan":
        raise ValueError("averaging field is specific to wilson-cowan")
    return VectorField(_wc_avg_kernel, _param_vector(model, 0.0), 4, "wilson-cowan/avg")


# ----------------------------------------------------------- evaluation

def sigmoid(which: str, u, params: ParamSet):
    """Firing-rate sigmoid ``N(u) = (lambda/2) [1 + erf(g u / sqrt(2 (1 + g^2 sigma^2)))]``.

    ``which`` is ``"N_x"`` or ``"N_y"``.  Accepts scalars or arrays.
    """
    if which == "N_x":
        lam, c = params.lambda_x, _erf_scale(params.g1, params.sigma_x)
    elif which == "N_y":
        lam, c = params.lambda_y, _erf_scale(params.g2, params.sigma_y)
    else:
        raise ValueError(f"which must be 'N_x' or 'N_y', got {which!r}")
    return 0.5 * lam * (1.0 + erf(c * np.asarray(u, dtype=float)))


def _sigmoid_slope(which: str, u, params: ParamSet):
    if which == "N_x":
        lam, c = params.lambda_x, _erf_scale(params.g1, params.sigma_x)
    else:
        lam, c = params.lambda_y, _erf_scale(params.g2, params.sigma_y)
    return lam * c / math.sqrt(math.pi) * np.exp(-(c * np.asarray(u, dtype=float)) ** 2)


def wc_jacobian(params: ParamSet, x: float, y: float, mu: float) -> np.ndarray:
    """Jacobian of the Wilson-Cowan fast subsystem in ``(x, y)``."""
    ux = params.J_xx * x + params.J_xy * y + mu
    uy = params.J_yx * x + params.J_yy * y + params.rho
    sx = _sigmoid_slope("N_x", ux, params)
    sy = _sigmoid_slope("N_y", uy, params)
    d = params.delta
    return np.array([[-1.0 + sx * params.J_xx, sx * params.J_xy],
                     [d * sy * params.J_yx, d * (-1.0 + sy * params.J_yy)]])


def _check_form(model: ModelSpec, form: str):
    if form not in model.forms:
        raise ValueError(f"model {model.name!r} has no {form!r} form (available: {model.forms})")


def _kernel_rhs(model, form, state, eps=None):
    vf = vector_field(model, form)
    params = _param_vector(model, eps)
    out = np.empty(model.dim)
    vf.kernel(0.0, np.asarray(state, dtype=float), params, out)
    return out


S0_TOL = 1e-8
BRANCH_TOL = 1e-8


def rhs(model: ModelSpec, form: str, kind: str, state) -> np.ndarray:
    """Right-hand side of ``model`` in coordinate ``form`` for subsystem ``kind``.

    ``full-fast-time`` and ``fast`` are in fast time; ``full-slow-time``,
    ``slow`` and ``averaged-slow`` are in slow time ``tau = eps t``.  The slow
    kinds expect ``state`` on the critical manifold (``slow``) or on the
    fast-subsystem cycle branch (``averaged-slow``) and return the tangent
    vector of the constrained flow; ``theta`` does not evolve there.
    """
    _check_form(model, form)
    if kind not in model.kinds:
        raise ValueError(f"subsystem {kind!r} unavailable for model {model.name!r}")
    state = np.asarray(state, dtype=float)
    if state.shape != (model.dim,):
        raise ValueError(f"state must have shape ({model.dim},), got {state.shape}")

    if kind == "full-fast-time":
        return _kernel_rhs(model, form, state)
    if kind == "fast":
        return _kernel_rhs(model, form, state, eps=0.0)
    if kind == "full-slow-time":
        eps = model.params.eps
        if eps <= 0:
            raise ValueError("slow-time parametrisation needs eps > 0")
        out = _kernel_rhs(model, form, state)
        out[:-1] /= eps
        out[-1] /= eps
        return out
    if kind == "slow":
        return _slow_rhs(model, form, state)
    return _averaged_rhs(model, form, state)


def _slow_rhs(model, form, state):
    p = model.params
    if model.name == "vanderpol":
        x, mu = state
        if abs(mu - (x - x ** 3 / 3.0)) > S0_TOL:
            raise ValueError("state is not on the critical manifold mu = x - x^3/3")
        mudot = x - p.a
        return np.array([mudot / (1.0 - x * x), mudot])
    if model.is_polar:
        r = state[0] if form == "polar" else math.hypot(state[0], state[1])
        if abs(r) > S0_TOL:
            raise ValueError("state is not on the critical manifold r = 0")
        mu = state[2]
        return np.array([0.0, 0.0, p.k - model.alpha * mu])
    x, y, mu = state
    out = np.empty(3)
    _wc_kernel(0.0, state, _param_vector(model, 0.0), out)
    if max(abs(out[0]), abs(out[1])) > S0_TOL:
        raise ValueError("state is not on the critical manifold")
    mudot = p.k - x - y
    jac = wc_jacobian(p, x, y, mu)
    dmu = np.array([_sigmoid_slope("N_x", p.J_xx * x + p.J_xy * y + mu, p), 0.0])
    dxy = -np.linalg.solve(jac, dmu) * mudot
    return np.array([dxy[0], dxy[1], mudot])


def cycle_branch_mu(r):
    """``mu`` on the polar cycle branch ``0 = mu + 2 r^2 - r^4``."""
    r2 = np.asarray(r, dtype=float) ** 2
    return r2 * r2 - 2.0 * r2


def _averaged_rhs(model, form, state):
    p = model.params
    if model.is_polar:
        if form == "polar":
            r = state[0]
        else:
            r = math.hypot(state[0], state[1])
        mu = state[2]
        if r <= 0 or abs(mu - cycle_branch_mu(r)) > BRANCH_TOL:
            raise ValueError("state is not on the cycle branch mu = r^4 - 2 r^2")
        mudot = p.k - r * r - model.alpha * mu
        dmu_dr = 4.0 * r ** 3 - 4.0 * r
        rdot = mudot / dmu_dr if dmu_dr != 0.0 else math.copysign(math.inf, mudot)
        if form == "polar":
            return np.array([rdot, 0.0, mudot])
        return np.array([rdot * state[0] / r, rdot * state[1] / r, mudot])
    # wilson-cowan: average over the fast cycle through ``state``
    from .slowavg import wc_cycle_average

    mudot = wc_cycle_average(model, state)
    return np.array([0.0, 0.0, mudot])


# ---------------------------------------------------------- coordinates

def polar_to_cartesian(state) -> np.ndarray:
    """``(r, theta, mu) -> (r cos theta, r sin theta, mu)``; works row-wise on arrays."""
    s = np.asarray(state, dtype=float)
    r, th, mu = s[..., 0], s[..., 1], s[..., 2]
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    return np.stack([r * np.cos(th), r * np.sin(th), mu], axis=-1)


def cartesian_to_polar(state) -> np.ndarray:
    """Inverse of :func:`polar_to_cartesian` with ``theta`` in ``[0, 2 pi)``.

    At the origin the angle is set to 0.
    """
    s = np.asarray(state, dtype=float)
    x, y, mu = s[..., 0], s[..., 1], s[..., 2]
    r = np.hypot(x, y)
    th = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    th = np.where(r == 0.0, 0.0, th)
    # mod can return 2 pi for tiny negative angles
    th = np.where(th >= 2.0 * np.pi, 0.0, th)
    return np.stack([r, th, mu], axis=-1)
