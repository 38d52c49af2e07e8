import numpy as np
import pytest
from scipy import integrate

from ssmpkit import battery as B
from ssmpkit.mapcore import JumpLaw, MapSpec, stationary_pi
from ssmpkit.rng import RngStream
from ssmpkit.stationary import (estimate_pi_plus, estimate_rho, renewal_limit_check,
                                rho_ominus_closed_form, sample_rho_oplus)
from ssmpkit.stats import ks_distance, ks_one_sample


def test_rho_bm_creeping():
    R = estimate_rho(MapSpec.levy(0.5, 1.0), 0, [2.0, 4.0], 3000, RngStream(1, 0), bridge=True)
    assert np.all(R.rho.values("z") == 0) and np.all(R.rho.values("y") == 0)


def test_rho_exp_both_sides():
    R = estimate_rho(B.exp1_cpp(), 0, [20.0], 100_000, RngStream(2, 0))
    cdf = rho_ominus_closed_form(1.0).cdf
    assert ks_one_sample(R.rho.values("z"), cdf)[0] < 0.02
    assert ks_one_sample(-R.rho.values("y"), cdf)[0] < 0.02


def test_rho_cauchy_decreasing():
    R = estimate_rho(B.slow_exp1(), 0, [5.0, 10.0, 20.0], 20_000, RngStream(3, 0))
    assert R.cauchy[(0, 2)] > R.cauchy[(1, 2)]
    assert R.to_deepest[-1] == 0.0


def test_rho_levels_must_increase():
    with pytest.raises(ValueError):
        estimate_rho(B.exp1_cpp(), 0, [5.0, 2.0], 10, RngStream(1, 0))


def test_closed_form_density():
    f = rho_ominus_closed_form(1.0)
    assert f(0.0) == 1.0
    mass, _ = integrate.quad(f, 0, np.inf, epsabs=1e-12)
    assert abs(mass - 1) < 1e-8
    assert abs(integrate.quad(rho_ominus_closed_form(2.5), 0, np.inf)[0] - 1) < 1e-8


def test_closed_form_rejects_bad_beta():
    with pytest.raises(ValueError):
        rho_ominus_closed_form(0.0)


def test_pi_plus_single_state():
    e = estimate_pi_plus(MapSpec.levy(1.0, 1.0), 0.5, 200, RngStream(4, 0), y_top=10)
    assert e.probs.tolist() == [1.0]


def test_pi_plus_symmetric():
    spec = MapSpec([[-1.0, 1.0], [1.0, -1.0]], [1.0, 1.0], [1.0, 1.0], [0.0, 0.0],
                   (JumpLaw.none(), JumpLaw.none()))
    e = estimate_pi_plus(spec, 0.5, 400, RngStream(5, 0), y_top=50)
    assert abs(e.probs[0] - 0.5) < 3 * e.se[0]


def test_pi_plus_drift_pair():
    spec = B.pi_plus_pair()
    e = estimate_pi_plus(spec, 0.5, 400, RngStream(6, 0), y_top=50)
    pi = stationary_pi(spec.Q)
    assert e.probs[0] > pi[0]
    # skeleton estimate against the independent local-time record
    assert abs(e.probs[0] - e.local_time[0]) < 3 * np.hypot(e.se[0], e.local_time_se[0])
    assert e.tv < 0.02


def test_renewal_unit_drift():
    r = renewal_limit_check(MapSpec.levy(1.0, 0.0), [1.0], [2.0, 5.0], 200, RngStream(7, 0))
    np.testing.assert_allclose(r["lhs"], 1.0, atol=1e-9)
    assert r["rhs"] == pytest.approx(1.0, abs=1e-9)


def test_renewal_g_zero():
    r = renewal_limit_check(B.exp1_cpp(), [0.0], [3.0], 500, RngStream(8, 0))
    assert np.all(r["lhs"] == 0) and r["rhs"] == 0


def test_renewal_exp_jumps():
    r = renewal_limit_check(B.exp1_cpp(), [1.0], [20.0], 100_000, RngStream(9, 0))
    assert abs(r["lhs"][0] / r["rhs"] - 1) < 0.1


def test_rho_oplus_bm():
    d = sample_rho_oplus(MapSpec.levy(0.5, 1.0), 5.0, 2000, RngStream(10, 0))
    assert np.all(d.values("y") == 0)


def test_rho_oplus_exp():
    d = sample_rho_oplus(B.exp1_cpp(), 20.0, 50_000, RngStream(11, 0))
    y = d.values("y")
    assert np.all(y <= 0) and abs(d.weights.sum() - 1) < 1e-12
    assert ks_one_sample(-y, "expon")[0] < 0.02


def test_rho_oplus_matches_rho_marginal():
    R = estimate_rho(B.jump_entrance(), 0, [20.0], 20_000, RngStream(12, 0))
    d = sample_rho_oplus(B.jump_entrance(), 20.0, 20_000, RngStream(12, 1))
    assert ks_distance(R.oplus().marginal("y"), d.marginal("y")) < 0.03
