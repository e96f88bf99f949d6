import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torcanard.ode import (DenseOutputUnavailable, IntegratorConfig, NonFiniteStateError, StepLimitError,
                           VectorField, dense_eval, integrate, locate_event)
from torcanard.models import vector_field, make_model


def test_exponential_decay_matches_closed_form():
    traj = integrate(lambda t, y: -0.5 * y, [2.0], (0.0, 10.0))
    assert traj.states[-1, 0] == pytest.approx(2.0 * math.exp(-5.0), rel=1e-9)
    assert traj.states[0, 0] == 2.0


def test_harmonic_oscillator_compiled_field():
    # canonical model with r0 = 1 on the frozen fast subsystem at mu = -1 sits on the fold cycle
    m = make_model("canonical", eps=0.0)
    f = vector_field(m, "cartesian", "fast")
    traj = integrate(f, [1.0, 0.0, -1.0], (0.0, 2 * math.pi))
    np.testing.assert_allclose(traj.states[-1], [1.0, 0.0, -1.0], atol=1e-8)


def test_dense_output_is_exact_at_steps_and_accurate_between():
    traj = integrate(lambda t, y: np.array([y[1], -y[0]]), [0.0, 1.0], (0.0, 6.0))
    for i in (0, len(traj.times) // 2, len(traj.times) - 1):
        np.testing.assert_array_equal(dense_eval(traj, traj.times[i]), traj.states[i])
    for t in np.linspace(0.0, 6.0, 37):
        assert dense_eval(traj, t)[0] == pytest.approx(math.sin(t), abs=1e-8)


def test_dense_output_requires_interpolants():
    traj = integrate(lambda t, y: -y, [1.0], (0.0, 1.0), dense=False)
    with pytest.raises(DenseOutputUnavailable):
        dense_eval(traj, 0.5)


def test_event_location_finds_zero_crossings_of_sine():
    traj = integrate(lambda t, y: np.array([y[1], -y[0]]), [0.0, 1.0], (0.0, 10.0),
                     events=[("down", lambda t, y: y[0], "down")])
    times = [e[0] for e in traj.events]
    np.testing.assert_allclose(times, [math.pi, 3 * math.pi], atol=1e-9)
    up = locate_event(traj, lambda t, y: y[0], "up")
    np.testing.assert_allclose([u[0] for u in up], [2 * math.pi], atol=1e-9)


def test_reversed_field_retraces_forward_solution():
    m = make_model("leidenator", k=0.5, eps=0.01)
    f = vector_field(m)
    fwd = integrate(f, [0.3, 0.1, -0.2], (0.0, 5.0))
    back = integrate(f.reversed(), fwd.states[-1], (0.0, 5.0))
    np.testing.assert_allclose(back.states[-1], [0.3, 0.1, -0.2], atol=1e-8)


def test_step_limit_raises_with_partial_trajectory():
    with pytest.raises(StepLimitError) as err:
        integrate(lambda t, y: -y, [1.0], (0.0, 100.0), IntegratorConfig(max_step=0.1, max_steps=10))
    assert err.value.trajectory is not None
    assert len(err.value.trajectory.times) == 11


def test_blow_up_raises_non_finite():
    with pytest.raises(NonFiniteStateError):
        integrate(lambda t, y: y * y, [1.0], (0.0, 2.0))


@pytest.mark.parametrize("kw", [dict(rel_tol=0), dict(abs_tol=-1), dict(max_step=0), dict(max_steps=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_halved_config():
    cfg = IntegratorConfig(1e-8, 1e-10, 2.0, 100).halved()
    assert (cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.max_steps) == (5e-9, 5e-11, 2.0, 100)


def test_empty_span_rejected():
    with pytest.raises(ValueError):
        integrate(lambda t, y: y, [1.0], (1.0, 1.0))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-2.0, 1.0), y0=st.floats(-5.0, 5.0), t1=st.floats(0.1, 5.0))
def test_linear_scalar_solution(a, y0, t1):
    traj = integrate(lambda t, y: a * y, [y0], (0.0, t1))
    assert traj.states[-1, 0] == pytest.approx(y0 * math.exp(a * t1), rel=1e-8, abs=1e-11)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.0, 1.0))
def test_dense_output_between_steps(s):
    traj = integrate(lambda t, y: np.array([-y[0] + math.sin(t)]), [1.0], (0.0, 4.0))
    t = 4.0 * s
    exact = 1.5 * math.exp(-t) + 0.5 * (math.sin(t) - math.cos(t))
    assert dense_eval(traj, t)[0] == pytest.approx(exact, abs=1e-8)


def test_compiled_and_python_paths_agree():
    m = make_model("wilson-cowan")
    f = vector_field(m)
    a = integrate(f, [0.1, 0.1, -5.5], (0.0, 20.0))
    b = integrate(lambda t, y: f(t, y), [0.1, 0.1, -5.5], (0.0, 20.0))
    np.testing.assert_allclose(a.states[-1], b.states[-1], rtol=1e-12, atol=1e-14)
    assert isinstance(f, VectorField)
