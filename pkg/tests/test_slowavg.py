import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from torcanard import slowavg
from torcanard.fastbif import REPELLING
from torcanard.models import make_model
from torcanard.slowavg import STABLE, UNSTABLE, BufferPointReached


@pytest.fixture(scope="module")
def canonical():
    return make_model("canonical")


@pytest.fixture(scope="module")
def leid():
    return make_model("leidenator", alpha=0.2)


# ------------------------------------------------------------- averaged rhs

def test_avg_rhs_canonical_example(canonical):
    assert slowavg.avg_slow_rhs(canonical, 1.2, k=2.0) == pytest.approx(0.56, abs=1e-14)


def test_avg_rhs_leidenator_at_fold_is_zero(leid):
    assert slowavg.avg_slow_rhs(leid, 1.0, k=0.8, alpha=0.2) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(k=st.floats(1e-3, 10.0))
def test_avg_rhs_vanishes_at_sqrt_k(k):
    assert abs(slowavg.avg_slow_rhs(make_model("canonical"), math.sqrt(k), k=k)) < 1e-12


def test_avg_rhs_rejects_bad_points(canonical):
    with pytest.raises(ValueError):
        slowavg.avg_slow_rhs(canonical, 0.0)
    with pytest.raises(ValueError):
        slowavg.avg_slow_rhs(make_model("vanderpol"), 1.0)
    with pytest.raises(ValueError):
        slowavg.avg_slow_rhs(canonical, 1.0, alpha=0.1)


def _time_average_polar(r, k, alpha):
    # independent oracle: integrate the frozen fast flow with scipy and average k - x^2 - y^2 - alpha mu
    mu = r ** 4 - 2 * r ** 2

    def f(t, u):
        x, y, _ = u
        q = mu + 2 * (x * x + y * y) - (x * x + y * y) ** 2
        return [q * x - y, x + q * y, k - x * x - y * y - alpha * mu]

    sol = solve_ivp(f, (0.0, 2 * math.pi), [r, 0.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[2, -1] / (2 * math.pi)


@pytest.mark.parametrize("name, alpha", [("canonical", 0.0), ("leidenator", 0.2), ("leidenator", 0.45)])
@pytest.mark.parametrize("r", [0.3, 1.0, 1.3])
def test_avg_rhs_matches_time_quadrature(name, alpha, r):
    m = make_model(name) if name == "canonical" else make_model(name, alpha=alpha)
    k = 0.7
    expect = _time_average_polar(r, k, alpha)
    assert slowavg.avg_slow_rhs(m, r, k=k) == pytest.approx(expect, abs=1e-10)


def test_wc_average_matches_independent_quadrature(wc, wc_branch):
    rec = wc_branch.cycles[len(wc_branch) // 3]
    p = wc.params
    from torcanard.models import vector_field

    vf = vector_field(wc, kind="fast")

    def f(t, u):
        d = vf(t, u[:3])
        return [d[0], d[1], 0.0, p.k - u[0] - u[1]]

    sol = solve_ivp(f, (0.0, rec.period), [*rec.anchor, 0.0], method="DOP853", rtol=1e-12, atol=1e-13)
    assert slowavg.avg_slow_rhs(wc, rec) == pytest.approx(sol.y[3, -1] / rec.period, abs=1e-8)


def test_wc_average_rejects_off_cycle_state(wc, wc_branch):
    rec = wc_branch.cycles[len(wc_branch) // 3]
    with pytest.raises(ValueError):
        slowavg.wc_cycle_average(wc, rec.anchor + np.array([0.05, 0.0, 0.0]))


# -------------------------------------------------------------- equilibria

def test_equilibria_examples(canonical, leid):
    ((r, mu, s),) = slowavg.avg_slow_equilibria(canonical, 4.0)
    assert (r, mu, s) == (pytest.approx(2.0), pytest.approx(8.0), STABLE)
    ((r, mu, s),) = slowavg.avg_slow_equilibria(canonical, 0.25)
    assert (r, mu, s) == (pytest.approx(0.5), pytest.approx(-0.4375), UNSTABLE)
    assert slowavg.avg_slow_equilibria(leid, 0.0, 0.2) == []


@settings(max_examples=60, deadline=None)
@given(k=st.floats(0.01, 5.0), alpha=st.floats(0.0, 0.49))
def test_equilibria_are_roots_with_consistent_stability(k, alpha):
    m = make_model("leidenator", alpha=alpha)
    for r, mu, s in slowavg.avg_slow_equilibria(m, k, alpha):
        assert abs(slowavg.avg_slow_rhs(m, r, k, alpha)) < 1e-10
        assert mu == pytest.approx(r ** 4 - 2 * r ** 2, abs=1e-12)
        if abs(r - 1.0) > 1e-6:
            # sign change of <mu'> along the branch, oriented by the flow in mu
            h = 1e-5
            lo = slowavg.avg_slow_rhs(m, r - h, k, alpha)
            hi = slowavg.avg_slow_rhs(m, r + h, k, alpha)
            dmu = 4 * r ** 3 - 4 * r
            # the branch coordinate r moves like <mu'> / (dmu/dr)
            stable = (hi - lo) / dmu < 0
            assert s == (STABLE if stable else UNSTABLE)


@settings(max_examples=40, deadline=None)
@given(k=st.floats(0.01, 5.0))
def test_canonical_equilibrium_stable_iff_outer_branch(k):
    if abs(k - 1.0) < 1e-9:
        return
    ((r, _, s),) = slowavg.avg_slow_equilibria(make_model("canonical"), k)
    assert r == pytest.approx(math.sqrt(k))
    assert (s == STABLE) == (k > 1)


def test_singular_canard_k():
    assert slowavg.singular_canard_k(make_model("canonical")) == pytest.approx(1.0, abs=1e-12)
    for a in (0.1, 0.2, 0.3):
        assert slowavg.singular_canard_k(make_model("leidenator", alpha=a)) == pytest.approx(1 - a, abs=1e-12)


def test_avg_flow_profile_and_csv(leid, tmp_path):
    flow = slowavg.avg_slow_flow(leid, n=200, k=0.8)
    assert flow.domain_name == "r"
    np.testing.assert_allclose(flow.rhs, 0.8 - flow.domain ** 2 - 0.2 * flow.mu, atol=1e-15)
    assert flow.equilibria[0][0] == pytest.approx(1.0)
    path = tmp_path / "p.csv"
    slowavg.write_profile_csv(flow, path, ["h"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# h"
    assert lines[1] == "r,mu,avg_rhs"
    assert len(lines) == 202


# ------------------------------------------------------------- entry-exit

def test_entry_exit_canonical_example(canonical):
    for k in (1.0, 5.0):
        assert slowavg.entry_exit(canonical, -0.3, k) == pytest.approx(0.3, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(mu_in=st.floats(-0.5, -0.01), k=st.sampled_from([0.2, 1.0, 5.0]))
def test_entry_exit_canonical_is_reflection(mu_in, k):
    assert abs(slowavg.entry_exit(make_model("canonical"), mu_in, k) + mu_in) < 1e-10


def _leid_oracle(mu_in, k, a):
    # closed-form antiderivative of mu / (k - a mu)
    F = lambda m: -m / a - (k / a ** 2) * mpmath.log(k - a * m)
    mpmath.mp.dps = 40
    target = F(mpmath.mpf(mu_in))
    hi = min(mpmath.mpf(-mu_in), mpmath.mpf(k) / a * (1 - mpmath.mpf(10) ** -20))
    return float(mpmath.findroot(lambda m: F(m) - target, (mpmath.mpf(0), hi), solver="anderson"))


def test_entry_exit_leidenator_example(leid):
    out = slowavg.entry_exit(leid, -0.3, 0.8, 0.2)
    # slower repelling side accumulates expansion faster: exit falls short of the mirror point
    assert 0.0 < out < 0.3
    assert out == pytest.approx(_leid_oracle(-0.3, 0.8, 0.2), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(mu_in=st.floats(-1.0, -0.01), k=st.floats(0.2, 2.0), a=st.floats(0.05, 0.45))
def test_entry_exit_leidenator_matches_antiderivative(mu_in, k, a):
    m = make_model("leidenator", alpha=a)
    out = slowavg.entry_exit(m, mu_in, k, a)
    assert 0.0 < out < min(-mu_in, k / a)
    assert out == pytest.approx(_leid_oracle(mu_in, k, a), abs=1e-9)


def test_entry_exit_errors(canonical, leid):
    with pytest.raises(ValueError):
        slowavg.entry_exit(canonical, 0.1, 1.0)
    with pytest.raises(BufferPointReached):
        slowavg.entry_exit(canonical, -0.3, 0.0)
    with pytest.raises(BufferPointReached):
        slowavg.entry_exit(leid, -0.3, -0.1, 0.2)


def test_entry_exit_wilson_cowan_balances(wc):
    from scipy.integrate import quad
    from torcanard import fastbif

    hb = fastbif.rightmost_hopf(wc)
    p = wc.params
    eq = lambda m: fastbif.equilibrium_at(wc, m, hb.state)
    h0 = lambda m: p.k - eq(m)[0] - eq(m)[1]
    direction = math.copysign(1.0, h0(hb.mu))
    mu_in = hb.mu - direction * 0.05
    out = slowavg.entry_exit(wc, mu_in)
    assert (out - hb.mu) * direction > 0
    lam = lambda m: np.max(np.linalg.eigvals(fastbif.fast_jacobian(wc, eq(m))).real)
    total = quad(lambda m: lam(m) / h0(m), mu_in, out, epsabs=1e-12, limit=200)[0]
    assert abs(total) < 1e-8


# ----------------------------------------------------------- buffer point

def test_buffer_points(canonical, leid):
    assert slowavg.buffer_point(leid, 0.8, 0.2).mu == pytest.approx(4.0)
    bp = slowavg.buffer_point(leid, 0.0, 0.2)
    assert bp.exists and bp.mu == 0.0
    assert not slowavg.buffer_point(canonical, 0.5).exists
    assert slowavg.buffer_point(canonical, 0.0).degenerate


@settings(max_examples=50, deadline=None)
@given(k=st.floats(-1.0, 3.0), a=st.floats(0.01, 0.5))
def test_buffer_point_is_slow_equilibrium(k, a):
    m = make_model("leidenator", alpha=a)
    bp = slowavg.buffer_point(m, k, a)
    assert abs(slowavg.slow_rhs_on_s0(m, bp.mu, k, a)) < 1e-12
