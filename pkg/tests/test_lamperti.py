import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmpkit import battery as B
from ssmpkit.lamperti import (NeverExits, SsmpPath, additive_clock, exit_ensemble, exit_quadruple,
                              inverse_lamperti, lamperti_kiu, round_trip_error, scale_path)
from ssmpkit.mapcore import JumpLaw, MapPath, MapSpec, simulate_map
from ssmpkit.rng import RngStream
from ssmpkit.stats import ks_one_sample

EMPTY = {k: np.zeros(0) for k in ("time", "kind", "pre", "post", "state_pre", "state_post")}


def grid_path(xi_fn, T=2.0, mesh=1e-3):
    t = np.linspace(0.0, T, int(round(T / mesh)) + 1)
    return MapPath(t, xi_fn(t), np.zeros(t.size, int), EMPTY, math.inf, T, mesh)


def test_clock_zero_path():
    p = grid_path(lambda t: 0 * t)
    np.testing.assert_allclose(additive_clock(p, 1.0), p.t, atol=1e-14)


def test_clock_unit_drift(oracle):
    p = grid_path(lambda t: t, T=1.0)
    assert abs(additive_clock(p, 1.0)[-1] - oracle["clock_unit_drift_t1"]) < 1e-6


def test_clock_increasing():
    p = simulate_map(B.wr2(), 0.0, 0, 3.0, 1e-2, RngStream(1, 0))
    A = additive_clock(p, 1.3)
    same = np.diff(p.t) == 0
    assert np.all(np.diff(A)[~same] > 0)


def test_image_of_zero_path_unit_radius():
    ss = lamperti_kiu(grid_path(lambda t: 0 * t), 1.0)
    assert np.all(ss.r == 1.0) and np.all(ss.theta == 0)


def test_image_of_unit_drift():
    ss = lamperti_kiu(grid_path(lambda t: t), 1.0)
    assert np.abs(ss.r - (1 + ss.t)).max() < 1e-4


def test_image_reproduces_xi_at_samples():
    p = simulate_map(B.wr2(), 0.0, 1, 3.0, 1e-2, RngStream(2, 0))
    ss = lamperti_kiu(p, 0.8)
    m = ss.src >= 0
    np.testing.assert_allclose(np.log(ss.r[m]), p.xi[ss.src[m]], atol=1e-12)


def test_inverse_of_unit_radius():
    t = np.linspace(0, 2, 2001)
    back = inverse_lamperti(SsmpPath(1.0, t, np.ones_like(t), np.zeros(t.size, int)))
    assert np.abs(back.xi).max() == 0.0


def test_inverse_of_linear_radius():
    t = np.linspace(0, 3, 3001)
    back = inverse_lamperti(SsmpPath(1.0, t, 1 + t, np.zeros(t.size, int)))
    assert np.abs(back.xi - back.t).max() < 1e-4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]))
def test_round_trip_random_paths(replica, alpha):
    p = simulate_map(B.wr2(), 0.0, replica % 2, 3.0, 1e-3, RngStream(9, 0), replica=replica)
    assert round_trip_error(p, alpha) < 1e-2


def test_scale_identity_and_definition():
    t = np.linspace(0, 1, 11)
    ss = SsmpPath(1.0, t, 1 + t, np.zeros(11, int), horizon=1.0)
    one = scale_path(ss, 1.0)
    assert np.array_equal(one.t, ss.t) and np.array_equal(one.r, ss.r)
    two = scale_path(ss, 2.0)
    np.testing.assert_allclose(two.t, 2 * t)
    np.testing.assert_allclose(two.r, 2 * (1 + t))
    assert two.horizon == 2.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.3, 2.0))
def test_scale_composition(c1, c2, alpha):
    t = np.linspace(0, 1, 5)
    ss = SsmpPath(alpha, t, 1 + t, np.zeros(5, int))
    a = scale_path(scale_path(ss, c1), c2)
    b = scale_path(ss, c1 * c2)
    np.testing.assert_allclose(a.t, b.t, rtol=1e-12)
    np.testing.assert_allclose(a.r, b.r, rtol=1e-12)


def test_exit_quadruple_linear():
    t = np.linspace(0, 3, 3001)
    q = exit_quadruple(SsmpPath(1.0, t, 1 + t, np.zeros(t.size, int)), 2.0)
    assert q.state_before == q.state_after == 0
    assert q.logr_before == pytest.approx(math.log(2)) and q.logr_after == pytest.approx(math.log(2))


def test_exit_never():
    t = np.linspace(0, 1, 11)
    with pytest.raises(NeverExits):
        exit_quadruple(SsmpPath(1.0, t, np.ones(11), np.zeros(11, int)), 2.0)


def test_exit_bm_continuous():
    e = exit_ensemble(MapSpec.levy(0.5, 1.0), 1.0, 0.5, 0, 1.0, 2000, RngStream(3, 0))
    assert np.all(e["logr_before"] == e["logr_after"])


def test_exit_exp_jumps_overshoot():
    spec = MapSpec.levy(-0.5, 0.0, 2.0, JumpLaw.exponential(1.0))
    e = exit_ensemble(spec, 1.0, math.exp(-10), 0, 1.0, 20_000, RngStream(4, 0))
    ks, _ = ks_one_sample(e["logr_after"][e["exited"]], "expon")
    assert ks < 0.02
