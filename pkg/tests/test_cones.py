import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmpkit.cones import (ConeModel, cone_exponent, eigen_first, eigen_first_numeric,
                           exit_angles, harmonic_M, in_wedge, laplacian_ratio, map_drift_check,
                           martingale_check, polar_angle, simulate_conditioned_bm,
                           stable_exponents)
from ssmpkit.rng import RngStream
from ssmpkit.stats import ks_pvalue

ANGLES = {"pi/3": math.pi / 3, "pi/2": math.pi / 2, "pi": math.pi, "3pi/2": 1.5 * math.pi}


@pytest.mark.parametrize("name", sorted(ANGLES))
def test_eigenvalue_oracle(name, oracle):
    th = ANGLES[name]
    want = oracle["lambda1"][name]
    assert eigen_first(th)[0] == pytest.approx(want, rel=1e-12)
    assert eigen_first_numeric(th)[0] == pytest.approx(want, rel=1e-8)


def test_eigenfunction_boundary():
    th = 1.5 * math.pi
    _, m = eigen_first(th)
    assert abs(m(0.0)) < 1e-15 and abs(m(th)) < 1e-12
    _, mn = eigen_first_numeric(th)
    assert abs(mn(0.0)) < 1e-8 and abs(mn(th)) < 1e-6


def test_exponents():
    assert cone_exponent(math.pi, 2) == pytest.approx(1.0, abs=1e-15)
    assert cone_exponent(math.pi / 2, 2) == 2.0
    assert cone_exponent(2 * math.pi - 1e-9, 2) == pytest.approx(0.5, abs=1e-8)


def test_only_planar():
    with pytest.raises(NotImplementedError):
        cone_exponent(math.pi, 3)


def test_M_boundary_zero():
    m = ConeModel(1.5 * math.pi)
    assert harmonic_M(np.array([2.0, 0.0]), m) == pytest.approx(0.0, abs=1e-15)
    assert abs(harmonic_M(np.array([0.0, -2.0]), m)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 2 * math.pi - 0.01), st.floats(0.05, 0.95), st.floats(0.1, 10.0))
def test_M_scaling(theta0, frac, r):
    m = ConeModel(theta0)
    phi = frac * theta0
    x = r * np.array([math.cos(phi), math.sin(phi)])
    assert harmonic_M(2 * x, m) / harmonic_M(x, m) == pytest.approx(2**m.p, rel=1e-10)


@pytest.mark.parametrize("pt", [(0.3, 0.8), (-0.5, -0.2), (1.5, 0.1)])
def test_M_harmonic(pt):
    assert laplacian_ratio(ConeModel(1.5 * math.pi), pt, 1e-3) < 1e-3


def test_polar_angle_range():
    assert polar_angle(0.0, -1.0) == pytest.approx(1.5 * math.pi)
    assert in_wedge(np.array([-1.0, -0.5]), ConeModel(1.5 * math.pi))
    assert not in_wedge(np.array([1.0, -0.5]), ConeModel(1.5 * math.pi))


def test_conditioned_path_inside():
    m = ConeModel(1.5 * math.pi)
    p = simulate_conditioned_bm(m, (0.05, 0.05), 1e-3, R=2.0, rng=RngStream(1, 0))
    phi = np.mod(np.arctan2(p.y, p.x), 2 * math.pi)
    assert np.all((phi > 0) & (phi < m.theta0))
    assert math.hypot(p.x[-1], p.y[-1]) >= 2.0


def test_martingale():
    r = martingale_check(ConeModel(1.5 * math.pi), (0.5, 0.5), 1.0, 20_000, RngStream(2, 0))
    assert r["z"] < 3


def test_map_drift():
    m = ConeModel(1.5 * math.pi)
    r = map_drift_check(m, 0.1, 10.0, 4000, RngStream(3, 0), dt=1e-3)
    assert r["rel_err"] < 0.1 and r["target"] == pytest.approx(2 * m.p)


def test_exit_angles_range_and_symmetry():
    m = ConeModel(1.5 * math.pi)
    a = exit_angles(m, 0.01, 20_000, RngStream(4, 0))
    assert np.all((a > 0) & (a < m.theta0))
    assert abs(a.mean() - m.theta0 / 2) < 3 * a.std(ddof=1) / math.sqrt(a.size)


def test_exit_angle_methods_agree():
    m = ConeModel(1.5 * math.pi)
    a = exit_angles(m, 0.2, 3000, RngStream(5, 0), "map")
    b = exit_angles(m, 0.2, 3000, RngStream(5, 1), "euler")
    assert ks_pvalue(a, b) > 0.01


def test_psi_zero():
    assert stable_exponents(1.0, 2).psi(0.0) == 0


def test_kappa_value(oracle):
    assert stable_exponents(1.0, 2).kappa(2.0) == pytest.approx(oracle["kappa_alpha1_lam2"], rel=1e-14)


def test_factorization():
    assert stable_exponents(1.5, 2).factorization_residual([0.1, 1.0, 5.0]) < 1e-10


def test_psi_oracle(oracle):
    s = stable_exponents(1.5, 2)
    for th, (re, im) in oracle["psi_alpha1.5_d2"].items():
        assert s.psi(float(th)) == pytest.approx(complex(re, im), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.95), st.integers(2, 6), st.floats(-20, 20))
def test_factorization_property(alpha, d, theta):
    assert stable_exponents(alpha, d).factorization_residual([theta]) < 1e-9 * max(1, abs(theta)**alpha)


def test_stable_bad_alpha():
    with pytest.raises(ValueError):
        stable_exponents(2.0, 2)
