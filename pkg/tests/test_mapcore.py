import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmpkit import battery as B
from ssmpkit.mapcore import (JumpLaw, MapSpec, SpecError, build_dual, matrix_exponent,
                             simulate_map, stationary_pi, terminal_values, transpose_partner,
                             validate_spec, weak_reversibility_check)
from ssmpkit.rng import RngStream


def two_state(Q, drift=(0.0, 0.0), sigma=(1.0, 1.0)):
    return MapSpec(Q, drift, sigma, [0.0, 0.0], (JumpLaw.none(), JumpLaw.none()))


# validate_spec

def test_single_state_bm_accepted():
    validate_spec(MapSpec.levy(0.0, 1.0))


def test_valid_two_state_accepted():
    validate_spec(two_state([[-1.0, 1.0], [2.0, -2.0]]))


def test_negative_off_diagonal_rejected():
    with pytest.raises(SpecError, match=r"negative off-diagonal at \(0,1\)"):
        validate_spec(two_state([[-1.0, -1.0], [2.0, -2.0]]))


@pytest.mark.parametrize("field,val,msg", [("sigma", [-1.0, 1.0], "negative sigma"),
                                           ("jump_rate", [0.0, -1.0], "negative jump_rate"),
                                           ("drift", [0.0, math.nan], "non-finite drift")])
def test_bad_fields_rejected(field, val, msg):
    with pytest.raises(SpecError, match=msg):
        validate_spec(two_state([[-1.0, 1.0], [1.0, -1.0]]).replace(**{field: val}))


def test_rows_must_sum_to_zero():
    with pytest.raises(SpecError, match="row 0"):
        validate_spec(two_state([[-1.0, 2.0], [1.0, -1.0]]))


# stationary_pi

def test_pi_single_state():
    assert stationary_pi([[0.0]]).tolist() == [1.0]


def test_pi_symmetric(oracle):
    np.testing.assert_allclose(stationary_pi([[-1, 1], [1, -1]]), oracle["pi_sym"], atol=1e-14)


def test_pi_two_state(oracle):
    np.testing.assert_allclose(stationary_pi([[-1, 1], [2, -2]]), oracle["pi_Q_1_2"], atol=1e-14)


def test_pi_reducible_rejected():
    with pytest.raises(SpecError, match="reducible"):
        stationary_pi([[-1.0, 1.0], [0.0, 0.0]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 5.0), min_size=6, max_size=6))
def test_pi_invariant_random_3_state(rates):
    Q = np.zeros((3, 3))
    Q[~np.eye(3, dtype=bool)] = rates
    Q -= np.diag(Q.sum(axis=1))
    pi = stationary_pi(Q)
    assert abs(pi.sum() - 1) < 1e-12
    assert np.all(pi > 0)
    assert np.abs(pi @ Q).max() < 1e-10


# matrix_exponent

def test_F_at_zero_is_Q():
    s = B.wr2()
    np.testing.assert_allclose(matrix_exponent(s, 0.0), s.Q, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-20, 20))
def test_F_brownian(lam):
    assert matrix_exponent(MapSpec.levy(0.0, 1.0), lam)[0, 0] == pytest.approx(-lam**2 / 2, abs=1e-12)


def test_F_matches_monte_carlo(oracle):
    o = oracle["mexp_gauss2"]
    spec = two_state(o["Q"], o["drift"], o["sigma"])
    # Gaussian parts between switches are exact, so a unit step loses nothing
    N = 1_000_000
    for j in range(2):
        x, th, _ = terminal_values(spec, 0.0, j, o["t"], N, RngStream(7, j), mesh=1.0)
        e = np.exp(1j * o["lam"] * x)
        for k in range(2):
            v = e * (th == k)
            for part, want in ((v.real, o["re"][j][k]), (v.imag, o["im"][j][k])):
                se = part.std() / math.sqrt(N)
                assert abs(part.mean() - want) < 3 * se + 1e-12


# simulate_map

def test_zero_spec_constant():
    spec = MapSpec([[0.0]], [0.0], [0.0], [0.0], (JumpLaw.none(),))
    p = simulate_map(spec, 1.5, 0, 3.0, 0.1, RngStream(1, 0))
    assert np.all(p.xi == 1.5) and np.all(p.theta == 0)


def test_pure_drift_exact():
    p = simulate_map(MapSpec.levy(1.0, 0.0), 0.25, 0, 3.0, 1e-2, RngStream(1, 0))
    assert p.xi[-1] == pytest.approx(3.25, abs=1e-12)
    assert p.t[-1] == pytest.approx(3.0, abs=1e-12)


def test_symmetric_switch_mean_zero():
    spec = two_state([[-1, 1], [1, -1]], (1.0, -1.0), (0.0, 0.0))
    th0 = np.array([0.5, 0.5])
    x, _, _ = terminal_values(spec, 0.0, th0, 2.0, 100_000, RngStream(3, 0))
    assert abs(x.mean()) < 3 * x.std() / math.sqrt(x.size)


def test_path_events_and_monotone_time():
    p = simulate_map(B.wr2(), 0.0, 0, 5.0, 1e-2, RngStream(2, 0))
    assert np.all(np.diff(p.t) >= 0)
    for t0 in p.events["time"]:
        assert np.sum(p.t == t0) >= 2


def test_same_stream_same_path():
    a = simulate_map(B.wr2(), 0.0, 0, 2.0, 1e-2, RngStream(5, 1), replica=3)
    b = simulate_map(B.wr2(), 0.0, 0, 2.0, 1e-2, RngStream(5, 1), replica=3)
    assert np.array_equal(a.xi, b.xi) and np.array_equal(a.t, b.t)


# build_dual and weak reversibility

def test_dual_of_levy():
    d = build_dual(MapSpec.levy(0.7, 1.0))
    assert d.drift[0] == -0.7 and d.sigma[0] == 1.0


def test_dual_involution():
    s = B.wr2()
    assert build_dual(build_dual(s)).same_as(s.replace(partner=None), 1e-12)
    s2 = B.pi_plus_pair()
    assert build_dual(build_dual(s2)).same_as(s2, 1e-12)


def test_dual_Q_two_state(oracle):
    s = two_state([[-1.0, 1.0], [2.0, -2.0]])
    np.testing.assert_allclose(build_dual(s).Q, [[-1, 1], [2, -2]], atol=1e-14)


def test_asymmetric_switch_needs_partner():
    s = B.wr2().replace(partner=None)
    with pytest.raises(SpecError, match="partner"):
        build_dual(s)


def test_wr_self_dual_symmetric():
    s = two_state([[-1.0, 1.0], [1.0, -1.0]])
    assert weak_reversibility_check(s, build_dual(s)).max_residual < 1e-10


def test_wr_levy_zero():
    s = MapSpec.levy(0.3, 1.0, 1.0, JumpLaw.exponential(2.0))
    assert weak_reversibility_check(s, build_dual(s)).max_residual < 1e-14


def test_wr_all_ingredients():
    s = B.wr2()
    assert weak_reversibility_check(s, build_dual(s)).passed


def test_wr_perturbed_flagged():
    s = B.wr2()
    d = build_dual(s)
    Q = d.Q.copy()
    Q[0, 1] += 0.1
    Q[0, 0] -= 0.1
    r = weak_reversibility_check(s, d.replace(Q=Q))
    assert r.max_residual > 1e-3 and not r.passed


def test_transpose_partner_Q():
    s = B.wr2()
    pi = stationary_pi(s.Q)
    t = transpose_partner(s)
    np.testing.assert_allclose(np.diag(pi) @ t.Q, (np.diag(pi) @ s.Q).T, atol=1e-14)


# config round trip

def test_toml_round_trip(tmp_path):
    s = B.wr2().replace(partner=None)
    s.save(tmp_path / "s.toml")
    assert MapSpec.load(tmp_path / "s.toml").same_as(s)


def test_mean_drift(oracle):
    assert B.wr2().mean_drift() == pytest.approx(oracle["speed_wr2"], abs=1e-12)


@pytest.mark.parametrize("name,key", [("jump_entrance", "speed_jump_entrance"), ("wr2", "speed_wr2")])
def test_battery_speeds(name, key, oracle):
    assert B.named(name).mean_drift() == pytest.approx(oracle[key], abs=1e-12)


def test_trichotomy_battery_has_zero_mean_case():
    speeds = [s.mean_drift() for _, s in B.trichotomy_battery()]
    assert len(speeds) == 6 and sum(abs(v) < 1e-12 for v in speeds) >= 2
