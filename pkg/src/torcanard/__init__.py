"""Elliptic bursting: slow-fast models, singular orbits and torus-canard transitions.

Modules
-------
ode        adaptive Dormand-Prince integration with dense output and events
models     van der Pol, canonical burster, leidenator and Wilson-Cowan systems
fastbif    fast-subsystem equilibria, Hopf points and cycle branches
slowavg    slow and averaged-slow flows, entry-exit map, buffer point
singular   singular orbits, their validation and the regime cases in k
hunt       full-system classification and bisection of transitions in k
cli        ``torcanard --config run.ini``
"""

__version__ = "0.1.0"

from .models import ModelSpec, ParamSet, make_model  # noqa: E402
from .ode import IntegratorConfig, Trajectory, integrate  # noqa: E402

__all__ = ["__version__", "make_model", "ModelSpec", "ParamSet", "IntegratorConfig", "Trajectory", "integrate"]
