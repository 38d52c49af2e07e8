"""The acceptance battery: one function per criterion, each returning the
checked statistics as TestReports plus the data tables behind them."""
from __future__ import annotations

import hashlib
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import battery as B
from ._io import write_csv
from .conditioning import conditioned_marginal, entrance_ensemble, estimate_Hplus
from .cones import (apex_exit_law, cone_exponent, eigen_first, eigen_first_numeric,
                    laplacian_ratio, martingale_check, stable_exponents)
from .fluctuation import trichotomy, vigon_check, wiener_hopf_probe
from .lamperti import exit_ensemble, round_trip_error
from .mapcore import build_dual, simulate_map, stationary_pi
from .rng import RngStream
from .stationary import estimate_rho, rho_ominus_closed_form
from .stats import TestReport, corr_se, ks_one_sample, ks_pvalue

DEFAULT_SEED = 20240917
MESH = 1e-3


@dataclass
class Criterion:
    number: int
    title: str
    reports: list
    data: dict = field(default_factory=dict)  # name -> (column names, columns)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        parts = "; ".join(f"{r.name} {r.value:.4g} {r.relation} {r.threshold:.4g}"
                          + ("" if r.passed else " [fail]") for r in self.reports)
        return f"{tag} C{self.number:02d} {self.title}: {parts}"

    def summary(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "reports": [r.to_dict() for r in self.reports]}

    def write(self, out: Path) -> list:
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for name, (cols, vals) in sorted(self.data.items()):
            p = out / f"c{self.number:02d}_{name}.csv"
            write_csv(p, cols, vals)
            files.append(p)
        return files


def _stream(seed, k) -> RngStream:
    return RngStream(int(seed), int(k))


# ---------------------------------------------------------------- 1

def c01_round_trip(seed=DEFAULT_SEED, n_paths: int = 100) -> Criterion:
    spec = B.wr2()
    s = _stream(seed, 1)
    reps, data = [], {}
    for tag, mesh in (("", MESH), (" mesh/2", MESH / 2)):
        errs = np.empty(n_paths)
        alphas = np.empty(n_paths)
        for i in range(n_paths):
            a = (0.5, 1.0, 2.0)[i % 3]
            p = simulate_map(spec, 0.0, i % 2, 5.0, mesh, s.fork(int(mesh * 1e7)), replica=i)
            errs[i] = round_trip_error(p, a)
            alphas[i] = a
        reps.append(TestReport("max round-trip error" + tag, float(errs.max()), "<", 10 * mesh,
                               (n_paths,), seed, {"mesh": mesh}))
        data["errors" + tag.replace(" ", "_").replace("/", "_")] = (("alpha", "error"), (alphas, errs))
    return Criterion(1, "Lamperti round trip", reps, data)


# ---------------------------------------------------------------- 2

def c02_scaling(seed=DEFAULT_SEED, N: int = 100_000, z: float = 0.25, c: float = 2.0,
                alpha: float = 1.0, mesh: float = MESH) -> Criterion:
    """Exit of the unit ball from radius c z versus c times the process from z,
    which exits the unit ball when the unscaled path leaves radius 1/c."""
    spec = B.wr2()
    s = _stream(seed, 2)
    a = exit_ensemble(spec, alpha, c * z, 0, 1.0, N, s.fork(1), mesh=mesh, bridge=True)
    b = exit_ensemble(spec, alpha, z, 0, 1.0 / c, N, s.fork(2), mesh=mesh, bridge=True)
    ma, mb = a["exited"], b["exited"]
    p_over = ks_pvalue(a["logr_after"][ma], b["logr_after"][mb])
    p_time = ks_pvalue(a["time"][ma], c**alpha * b["time"][mb])
    n = (int(ma.sum()), int(mb.sum()))
    reps = [TestReport("radius-overshoot KS p", p_over, ">", 0.01, n, seed),
            TestReport("exit time vs c^alpha scaled exit time KS p", p_time, ">", 0.01, n, seed)]
    data = {"from_cz": (("logr_after", "time"), (a["logr_after"][ma], a["time"][ma])),
            "scaled_from_z": (("logr_after", "time"), (b["logr_after"][mb], c**alpha * b["time"][mb]))}
    return Criterion(2, "scaling property", reps, data)


# ---------------------------------------------------------------- 3

def c03_wiener_hopf(seed=DEFAULT_SEED, N: int = 100_000) -> Criterion:
    s = _stream(seed, 3)
    reps, data = [], {}
    for tag, mesh in (("", MESH), (" mesh/2", MESH / 2)):
        w = wiener_hopf_probe(B.bm(0.0, 1.0), 0.5, N, s.fork(int(mesh * 1e7)), mesh=mesh)
        ks, _ = ks_one_sample(w["sup"], "expon")
        r, se = corr_se(w["sup"], w["gap"])
        reps.append(TestReport("sup KS vs Exp(1)" + tag, ks, "<", 0.01, (N,), seed, {"mesh": mesh}))
        reps.append(TestReport("|corr(sup, gap)|/SE" + tag, abs(r) / se, "<", 3.0, (N,), seed,
                               {"corr": r, "se": se}))
        data["probe" + tag.replace(" ", "_").replace("/", "_")] = (
            ("sup", "gap", "g", "e_q"), (w["sup"], w["gap"], w["g"], w["e_q"]))
    return Criterion(3, "Wiener-Hopf Brownian benchmark", reps, data)


# ---------------------------------------------------------------- 4

def c04_duality(seed=DEFAULT_SEED, N: int = 100_000, q: float = 0.5) -> Criterion:
    spec = B.wr2()
    dual = build_dual(spec)
    pi = stationary_pi(spec.Q)
    s = _stream(seed, 4)
    reps, data = [], {}
    for tag, mesh in (("", MESH), (" mesh/2", MESH / 2)):
        k = int(mesh * 1e7)
        a = wiener_hopf_probe(dual, q, N, s.fork(2 * k), theta0=pi, mesh=mesh)["sup"]
        b = wiener_hopf_probe(spec, q, N, s.fork(2 * k + 1), theta0=pi, mesh=mesh)["gap"]
        reps.append(TestReport("dual sup vs primal gap KS p" + tag, ks_pvalue(a, b), ">", 0.01,
                               (N, N), seed, {"mesh": mesh}))
        data["sup_gap" + tag.replace(" ", "_").replace("/", "_")] = (("dual_sup", "primal_gap"), (a, b))
    return Criterion(4, "duality at an exponential time", reps, data)


# ---------------------------------------------------------------- 5

def c05_stationary_overshoot(seed=DEFAULT_SEED, N: int = 100_000) -> Criterion:
    spec = B.slow_exp1()
    R = estimate_rho(spec, 0, [5.0, 10.0, 20.0], N, _stream(seed, 5))
    z = R.ominus().values(0)
    ks, _ = ks_one_sample(z, rho_ominus_closed_form(1.0).cdf)
    d520, d1020 = R.cauchy[(0, 2)], R.cauchy[(1, 2)]
    reps = [TestReport("overshoot KS vs Exp(1) at x=20", ks, "<", 0.02, (N,), seed),
            TestReport("d(5,20) - d(10,20)", d520 - d1020, ">", 0.0, (N, N, N), seed,
                       {"d_5_20": d520, "d_10_20": d1020, "d_5_10": R.cauchy[(0, 1)]})]
    data = {f"rho_x{int(x)}": (("v", "y", "phi", "z"), tuple(d.samples.T))
            for x, d in zip(R.levels, R.dists)}
    return Criterion(5, "stationary overshoot", reps, data)


# ---------------------------------------------------------------- 6

def c06_vigon(seed=DEFAULT_SEED, N: int = 1_000_000) -> Criterion:
    y = np.array([0.5, 1.0, 2.0])
    v = vigon_check(B.vigon_levy(), y, N, _stream(seed, 6))
    dev = float(np.abs(v["ratio"] - 1).max())
    shape = v["lhs"] / v["lhs"][0] * np.exp(2.0 * (y - y[0]))
    reps = [TestReport("max |LHS/RHS - 1|", dev, "<", 0.05, (N,), seed,
                       {"ratio": v["ratio"].tolist(), "ratio_se": v["ratio_se"].tolist(),
                        "lhs_shape_vs_exp(-2y)": shape.tolist()})]
    data = {"table": (("y", "lhs", "lhs_se", "rhs", "rhs_se", "ratio"),
                      (y, v["lhs"], v["lhs_se"], v["rhs"], v["rhs_se"], v["ratio"]))}
    return Criterion(6, "Vigon identity", reps, data)


# ---------------------------------------------------------------- 7

def _expected_label(v: float) -> str:
    if abs(v) < 1e-12:
        return "oscillates"
    return "drifts_up" if v > 0 else "drifts_down"


def c07_trichotomy(seed=DEFAULT_SEED, T: float = 1000.0, N: int = 2000) -> Criterion:
    s = _stream(seed, 7)
    rows = []
    for i, (name, spec) in enumerate(B.trichotomy_battery()):
        r = trichotomy(spec, T, N, s.fork(i))
        rows.append((name, r["analytic"], r["mean"], r["se"], r["label"],
                     _expected_label(r["analytic"])))
    hits = sum(1 for r in rows if r[4] == r[5])
    reps = [TestReport("classifications matching the analytic drift sign", hits, ">=", len(rows),
                       (N,) * len(rows), seed, {r[0]: f"{r[4]} (analytic {r[1]:.6g}, "
                                                      f"mean {r[2]:.6g} +- {r[3]:.2g})" for r in rows})]
    for name, an, m, se, _, _ in rows:
        reps.append(TestReport(f"{name} |mean - analytic|/SE", abs(m - an) / se, "<", 3.0, (N,), seed))
    data = {"table": (("analytic", "mean", "se"), ([r[1] for r in rows], [r[2] for r in rows],
                                                   [r[3] for r in rows]))}
    return Criterion(7, "trichotomy", reps, data)


# ---------------------------------------------------------------- 8

def c08_conditioning(seed=DEFAULT_SEED, N_h: int = 100_000, N: int = 10_000) -> Criterion:
    s = _stream(seed, 8)
    dual = B.bm(-1.0, 1.0)
    y = -math.log(2) / 2
    H = estimate_Hplus(dual, [y], [0], 50.0, N_h, s.fork(1))
    v, se = float(H.values[0, 0]), float(H.se[0, 0])
    reps = [TestReport("|H+(-ln2/2) - 1/2|/SE", abs(v - 0.5) / se, "<", 3.0, (N_h,), seed,
                       {"estimate": v, "se": se, "horizon_bias": H.bias})]
    a = conditioned_marginal(dual, -1.0, 0, 1.0, N, s.fork(2), "rejection")
    data = {"xi1_rejection": (("xi1",), (a,))}
    for tag, dt in (("", MESH), (" dt/2", MESH / 2)):
        b = conditioned_marginal(dual, -1.0, 0, 1.0, N, s.fork(3 + int(dt * 1e7)),
                                 "h_transform_levy", mesh=dt)
        reps.append(TestReport("rejection vs h-transform xi_1 KS p" + tag, ks_pvalue(a, b), ">",
                               0.01, (N, N), seed, {"dt": dt}))
        data["xi1_htransform" + tag.replace(" ", "_").replace("/", "_")] = (("xi1",), (b,))
    return Criterion(8, "conditioning", reps, data)


# ---------------------------------------------------------------- 9

def c09_entrance(seed=DEFAULT_SEED, N: int = 10_000, N_rho: int = 100_000, alpha: float = 1.0,
                 log_r: float = -2.0) -> Criterion:
    """Exit quadruple of the ball of radius e^log_r under the entrance
    construction against the deep-passage estimate of rho; the exit time of
    radius delta against delta^alpha."""
    spec = B.jump_entrance()
    s = _stream(seed, 9)
    R = estimate_rho(spec, 0, [20.0], N_rho, s.fork(1))
    deltas = np.array([1e-3, 1e-2, 1e-1])
    E = entrance_ensemble(spec, alpha, N, s.fork(2), log_r=log_r, log_deltas=np.log(deltas))
    q = E["quad"]
    reps = []
    names = ("state before", "log radius before", "state after", "log radius after")
    for c in range(4):
        reps.append(TestReport(f"{names[c]} KS p", ks_pvalue(q[:, c], R.rho.values(c)), ">", 0.01,
                               (q.shape[0], R.rho.n), seed))
    tm = np.mean(np.minimum(E["tau"], 1.0), axis=0)
    slope = float(np.polyfit(np.log(deltas), np.log(tm), 1)[0])
    reps.append(TestReport("|slope/alpha - 1| for E[tau_delta ^ 1]", abs(slope / alpha - 1), "<",
                           0.2, (q.shape[0],), seed, {"slope": slope, "means": tm.tolist()}))
    data = {"entrance_quad": (("v", "y", "phi", "z"), tuple(q.T)),
            "rho_hat": (("v", "y", "phi", "z"), tuple(R.rho.samples.T)),
            "tau_mean": (("delta", "mean_tau_min_1"), (deltas, tm))}
    return Criterion(9, "entrance law", reps, data)


# ---------------------------------------------------------------- 10

def c10_cone(seed=DEFAULT_SEED, N: int = 100_000, reps_apex: int = 20,
             N_mart: int = 100_000) -> Criterion:
    s = _stream(seed, 10)
    model = B.wedge()
    angles = (math.pi / 3, math.pi / 2, math.pi, 1.5 * math.pi)
    rel = max(abs(eigen_first_numeric(t)[0] / eigen_first(t)[0] - 1) for t in angles)
    pts = [(0.3, 0.8), (-0.5, -0.2), (1.5, 0.1), (-0.1, 2.0)]
    harm = max(laplacian_ratio(model, p, 1e-3) for p in pts)
    mc = martingale_check(model, (0.5, 0.5), 1.0, N_mart, s.fork(1))
    wins = []
    for k in range(reps_apex):
        a = apex_exit_law(model, [1e-1, 1e-2, 1e-3], N, s.fork(100 + k))
        wins.append((a["ks"][(0, 2)], a["ks"][(1, 2)]))
    wins = np.array(wins)
    frac = float(np.mean(wins[:, 0] > wins[:, 1]))
    reps = [TestReport("eigenvalue closed form vs solver rel err", rel, "<", 1e-6, (), seed),
            TestReport("|p(pi/2, 2) - 2|", abs(cone_exponent(math.pi / 2, 2) - 2.0), "<=", 0.0, (), seed),
            TestReport("max |Delta_h M|/M", harm, "<", 1e-3, (), seed),
            TestReport("|E M(B) - M(x0)|/SE", mc["z"], "<", 3.0, (N_mart,), seed, mc),
            TestReport("fraction KS(1e-1,1e-3) > KS(1e-2,1e-3)", frac, ">", 0.95,
                       (N, reps_apex), seed, {"mean_ks": wins.mean(axis=0).tolist()})]
    data = {"apex_ks": (("ks_1e-1_1e-3", "ks_1e-2_1e-3"), (wins[:, 0], wins[:, 1]))}
    return Criterion(10, "Brownian motion in a wedge", reps, data)


# ---------------------------------------------------------------- 11

def c11_stable(seed=DEFAULT_SEED) -> Criterion:
    grid = [0.0, 0.1, 1.0, 5.0]
    reps = []
    vals = []
    for a, d in ((0.5, 2), (1.0, 2), (1.5, 3)):
        r = stable_exponents(a, d).factorization_residual(grid)
        vals.append(r)
        reps.append(TestReport(f"factorization residual alpha={a} d={d}", r, "<", 1e-10, (), seed))
    return Criterion(11, "stable exponents", reps, {"residuals": (("residual",), (vals,))})


# ---------------------------------------------------------------- 12

def _digest(folder: Path) -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir())}


def c12_determinism(seed=DEFAULT_SEED, runs=(c01_round_trip, c05_stationary_overshoot)) -> Criterion:
    """Re-run criteria with the same seed and compare data files byte for byte."""
    with tempfile.TemporaryDirectory() as tmp:
        digests = []
        for k in range(2):
            d = Path(tmp) / f"run{k}"
            for fn in runs:
                fn(seed).write(d)
            digests.append(_digest(d))
    same = sum(1 for n in digests[0] if digests[1].get(n) == digests[0][n])
    reps = [TestReport("byte-identical data files", same, ">=", max(len(digests[0]), 1),
                       (len(digests[0]),), seed)]
    return Criterion(12, "determinism", reps)


CRITERIA = {1: c01_round_trip, 2: c02_scaling, 3: c03_wiener_hopf, 4: c04_duality,
            5: c05_stationary_overshoot, 6: c06_vigon, 7: c07_trichotomy, 8: c08_conditioning,
            9: c09_entrance, 10: c10_cone, 11: c11_stable, 12: c12_determinism}


def run_criterion(k: int, seed: int = DEFAULT_SEED) -> Criterion:
    t0 = time.perf_counter()
    c = CRITERIA[k](seed)
    c.seconds = time.perf_counter() - t0
    return c


def run_battery(seed: int = DEFAULT_SEED, only=None, out: Path | None = None, echo=print) -> list:
    res = []
    for k in sorted(CRITERIA if only is None else only):
        c = run_criterion(k, seed)
        if out is not None:
            c.write(out)
        if echo is not None:
            echo(c.line())
        res.append(c)
    return res
