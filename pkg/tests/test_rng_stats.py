import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmpkit.rng import RngStream, as_stream, rng_fork
from ssmpkit.stats import (EmpiricalDist, TestReport, corr_se, ks_distance, ks_pvalue,
                           wasserstein1)


def test_same_seed_same_draws():
    a = rng_fork(11, 3).uniforms(1000)
    b = rng_fork(11, 3).uniforms(1000)
    assert np.array_equal(a, b)


def test_streams_uncorrelated():
    a = rng_fork(11, 0).normals(1000)
    b = rng_fork(11, 1).normals(1000)
    r, se = corr_se(a, b)
    assert abs(r) < 3 * se


def test_fork_distinct_keys():
    s = RngStream(1, 0)
    keys = {int(s.fork(i).key) for i in range(1000)}
    assert len(keys) == 1000


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_any_u64_seed(seed, sid):
    s = RngStream(seed, sid)
    assert 0 <= int(s.key) < 2**64


def test_bad_seed():
    with pytest.raises(ValueError):
        RngStream(-1, 0)


def test_as_stream_int():
    assert as_stream(5).key == RngStream(5, 0).key


def test_ks_same_object_zero():
    d = EmpiricalDist(np.random.default_rng(0).normal(size=100))
    assert ks_distance(d, d) == 0.0


def test_ks_point_masses():
    assert ks_distance(np.zeros(10), np.ones(10)) == 1.0


def test_ks_normals_small():
    g = rng_fork(3, 0).generator()
    assert ks_distance(g.normal(size=100_000), g.normal(size=100_000)) < 0.01


def test_ks_weighted_matches_repeated():
    x = np.array([0.0, 1.0, 2.0])
    w = np.array([1.0, 2.0, 1.0])
    d = EmpiricalDist(x, w)
    assert ks_distance(d, np.array([0.0, 1.0, 1.0, 2.0])) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50),
       st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_ks_symmetric_in_unit_interval(a, b):
    d = ks_distance(np.array(a), np.array(b))
    assert 0.0 <= d <= 1.0
    assert d == ks_distance(np.array(b), np.array(a))


def test_w1_identical_and_point_masses():
    x = np.arange(5.0)
    assert wasserstein1(x, x) == 0.0
    assert wasserstein1(np.zeros(3), np.ones(3)) == 1.0


def test_w1_exponentials(oracle):
    g = rng_fork(4, 0).generator()
    w = wasserstein1(g.exponential(1.0, 100_000), g.exponential(0.5, 100_000))
    assert abs(w - oracle["w1_exp1_exp2"]) < 0.02


def test_ks_pvalue_range():
    g = rng_fork(5, 0).generator()
    p = ks_pvalue(g.normal(size=1000), g.normal(size=1000))
    assert 0.0 <= p <= 1.0


def test_report_json_keys():
    r = TestReport("x", 0.5, "<", 1.0, (10,), 3)
    d = json.loads(r.to_json())
    assert set(d) == {"name", "value", "relation", "threshold", "passed", "sizes", "seed", "extra"}
    assert d["passed"] is True


def test_report_nan_fails():
    assert not TestReport("x", math.nan, "<", 1.0).passed


def test_empirical_marginal_and_csv(tmp_path):
    d = EmpiricalDist(np.array([[0, 1.5], [1, -0.5]]), names=("v", "z"))
    assert d.marginal("z").values().tolist() == [1.5, -0.5]
    d.to_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0].startswith("v,z")
