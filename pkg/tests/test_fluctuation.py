import math

import numpy as np
import pytest

from ssmpkit import battery as B
from ssmpkit.fluctuation import (NotCrossed, PassageError, classify_trichotomy, drift_rate,
                                 excursion_growth, first_passage, overshoot_ensemble,
                                 passage_arrays, trichotomy, vigon_check, wiener_hopf_probe)
from ssmpkit.mapcore import JumpLaw, MapSpec
from ssmpkit.rng import RngStream
from ssmpkit.stats import corr_se, ks_one_sample


def sym_switch():
    return B.trichotomy_battery()[1][1]


def test_unit_drift_passage_deterministic():
    r = first_passage(MapSpec.levy(1.0, 0.0), 0.0, 0, 2.0, RngStream(1, 0))
    assert r.tau == pytest.approx(2.0, abs=1e-12)
    assert r.undershoot == 0.0 and r.overshoot == 0.0 and r.crept


def test_exp_jump_overshoot_memoryless():
    d = overshoot_ensemble(B.exp1_cpp(), 0, 5.0, 100_000, RngStream(2, 0))
    ks, _ = ks_one_sample(d.values("z"), "expon")
    assert ks < 0.01


def test_level_below_start():
    r = first_passage(MapSpec.levy(0.0, 1.0), 1.0, 0, 0.5, RngStream(3, 0), mesh=1e-3)
    assert r.tau <= 1e-3 and r.undershoot >= 0.0


def test_not_crossed():
    r = first_passage(MapSpec.levy(-1.0, 0.0), 0.0, 0, 1.0, RngStream(3, 0), t_max=10.0)
    assert isinstance(r, NotCrossed)


def test_drift_down_ensemble_raises():
    with pytest.raises(PassageError):
        overshoot_ensemble(MapSpec.levy(-1.0, 0.0), 0, 1.0, 100, RngStream(1, 0), t_max=5.0)


def test_bm_creeps():
    d = overshoot_ensemble(MapSpec.levy(0.5, 1.0), 0, 2.0, 5000, RngStream(4, 0), bridge=True)
    assert np.all(d.values("z") == 0.0) and np.all(d.values("y") == 0.0)


def test_exp_beta_overshoot_deep():
    spec = MapSpec.levy(-0.5, 0.0, 2.0, JumpLaw.exponential(3.0))
    d = overshoot_ensemble(spec, 0, 20.0, 50_000, RngStream(5, 0))
    ks, _ = ks_one_sample(d.values("z"), lambda z: -np.expm1(-3.0 * z))
    assert ks < 0.015


def test_passage_levels_monotone():
    d = passage_arrays(B.wr2(), 0.0, 0, [1.0, 2.0, 4.0], 2000, RngStream(6, 0), bridge=True)
    assert np.all(np.diff(d["tau"], axis=1) >= 0)
    assert np.all(d["post"] >= d["levels"][None, :])


def test_wh_levy_independence():
    spec = MapSpec.levy(0.2, 1.0, 1.0, JumpLaw.two_sided(2.0, 1.0, 0.5))
    w = wiener_hopf_probe(spec, 0.5, 50_000, RngStream(7, 0))
    for a, b in ((w["g"], w["e_q"] - w["g"]), (w["sup"], w["gap"]),
                 (w["g"], w["gap"]), (w["sup"], w["e_q"] - w["g"])):
        r, se = corr_se(a, b)
        assert abs(r) < 3 * se


def test_wh_sup_bm_drift(oracle):
    # sup at Exp(q) for BM drift 1 is Exp(-1 + sqrt(1 + 2q)); q = 1 gives rate sqrt(3) - 1
    w = wiener_hopf_probe(MapSpec.levy(1.0, 1.0), 1.0, 50_000, RngStream(8, 0))
    rate = math.sqrt(3) - 1
    ks, _ = ks_one_sample(w["sup"], lambda x: -np.expm1(-rate * x))
    assert ks < 0.01


def test_drift_rate_levy():
    r = drift_rate(MapSpec.levy(0.7, 1.0), 50.0, 4000, RngStream(9, 0))
    assert abs(r["mean"] - 0.7) < 3 * r["se"]


def test_drift_rate_symmetric():
    r = drift_rate(sym_switch(), 200.0, 4000, RngStream(10, 0))
    assert abs(r["mean"]) < 3 * r["se"]


def test_drift_rate_pi_weighted(oracle):
    r = drift_rate(B.trichotomy_battery()[2][1], 200.0, 4000, RngStream(11, 0))
    assert r["analytic"] == pytest.approx(oracle["speed_drifts_1_-3"], abs=1e-12)
    assert abs(r["mean"] - oracle["speed_drifts_1_-3"]) < 3 * r["se"]


def test_drift_rate_wr2(oracle):
    r = drift_rate(B.wr2(), 200.0, 4000, RngStream(12, 0))
    assert abs(r["mean"] - oracle["speed_wr2"]) < 3 * r["se"]


def test_classify_labels():
    assert classify_trichotomy(-1 / 3, (-0.34, -0.32)) == "drifts_down"
    assert classify_trichotomy(1.0, (0.99, 1.01)) == "drifts_up"
    assert classify_trichotomy(0.0, (-0.5, 0.5)) == "inconclusive"
    g = {"max_ratio": 2.0, "min_ratio": 2.0}
    assert classify_trichotomy(0.0, (-0.01, 0.01), g) == "oscillates"


def test_trichotomy_unit_drift_up():
    assert trichotomy(MapSpec.levy(1.0, 0.0), 100.0, 500, RngStream(13, 0))["label"] == "drifts_up"


def test_symmetric_model_oscillates():
    r = trichotomy(sym_switch(), 1000.0, 2000, RngStream(14, 0))
    assert r["label"] == "oscillates"


def test_symmetric_model_excursions_exceed_5():
    # literal claim: both the running max and minus the running min exceed 5 by
    # T = 1000 in more than 99% of runs
    g = excursion_growth(sym_switch(), 1000.0, 2000, RngStream(15, 0))
    assert g["frac_both_exceed_5"] > 0.99


def test_vigon_spectrally_negative_zero():
    spec = MapSpec.levy(0.5, 1.0, 1.0, JumpLaw.exponential(2.0, -1))
    v = vigon_check(spec, [0.5, 1.0], 2000, RngStream(16, 0))
    assert np.all(v["lhs"] == 0) and np.all(v["rhs"] == 0)


def test_vigon_se_halves_when_N_quadruples():
    spec = B.vigon_levy()
    a = vigon_check(spec, [0.5, 1.0, 2.0], 5000, RngStream(17, 0))
    b = vigon_check(spec, [0.5, 1.0, 2.0], 20_000, RngStream(17, 1))
    q = b["ratio_se"] / a["ratio_se"]
    assert np.all((q > 0.4) & (q < 0.6))
    assert np.all(np.abs(b["ratio"] - 1) < 3 * b["ratio_se"])


def test_vigon_needs_gaussian_part():
    with pytest.raises(ValueError, match="Gaussian"):
        vigon_check(B.exp1_cpp(), [1.0], 10, RngStream(1, 0))
