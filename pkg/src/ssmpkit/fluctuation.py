"""First passage, over/undershoots, Wiener-Hopf probes, long-run drift,
trichotomy and the Vigon identity benchmark."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .mapcore import MapSpec, initial_states, stationary_pi, validate_spec
from .rng import as_stream
from .stats import EmpiricalDist


class PassageError(RuntimeError):
    """Too many replicas failed to cross the level."""


@dataclass(frozen=True)
class PassageRecord:
    level: float
    tau: float
    undershoot: float
    overshoot: float
    state_before: int
    state_after: int
    crept: bool


@dataclass(frozen=True)
class NotCrossed:
    level: float
    t_max: float
    running_max: float
    killed: bool


def passage_arrays(spec: MapSpec, x0, theta0, levels, N: int, rng, t_max: float = 1e4,
                   mesh: float = 1e-3, bridge: bool = False, alpha: float = 0.0) -> dict:
    """First passage of N replicas over each of the ascending ``levels``."""
    validate_spec(spec)
    levels = np.atleast_1d(np.asarray(levels, float))
    if np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be strictly increasing")
    s = as_stream(rng)
    th = initial_states(theta0, N, s.fork(1), spec.n_states)
    xs = np.broadcast_to(np.asarray(x0, float), (N,)).copy()
    tau, pre, post, jb, ja, crept, clk, runmax, killed = K.passage_batch(
        spec.packed, s.key, xs, th, levels, float(t_max), float(mesh), float(alpha), bool(bridge))
    return {"levels": levels, "tau": tau, "pre": pre, "post": post, "state_before": jb,
            "state_after": ja, "crept": crept, "clock": clk, "running_max": runmax,
            "killed": killed}


def first_passage(spec: MapSpec, x0: float, theta0: int, level: float, rng, t_max: float = 1e4,
                  mesh: float = 1e-3, bridge: bool = False):
    """PassageRecord for the first strict up-crossing of ``level``, or NotCrossed.

    Continuous crossings are detected on the mesh (``bridge=False``) or with the
    exact Brownian-bridge crossing law within each step (``bridge=True``)."""
    d = passage_arrays(spec, x0, theta0, [level], 1, rng, t_max, mesh, bridge)
    if not np.isfinite(d["tau"][0, 0]):
        return NotCrossed(float(level), float(t_max), float(d["running_max"][0]), bool(d["killed"][0]))
    return PassageRecord(float(level), float(d["tau"][0, 0]), max(float(level - d["pre"][0, 0]), 0.0),
                         float(d["post"][0, 0] - level), int(d["state_before"][0, 0]),
                         int(d["state_after"][0, 0]), bool(d["crept"][0, 0]))


def _check_crossed(tau, x, max_fail=0.01):
    frac = float(np.mean(~np.isfinite(tau)))
    if frac > max_fail:
        raise PassageError(f"{100 * frac:.2f}% of replicas never crossed level {x}; the MAP may "
                           "drift to -infinity or t_max is too short")
    return np.isfinite(tau)


def overshoot_ensemble(spec: MapSpec, theta0, x: float, N: int, rng, mesh: float = 1e-3,
                       bridge: bool = False, t_max: float = 1e4) -> EmpiricalDist:
    """(state_before, -undershoot, state_after, overshoot) at level x from (0, theta0)."""
    d = passage_arrays(spec, 0.0, theta0, [x], N, rng, t_max, mesh, bridge)
    ok = _check_crossed(d["tau"][:, 0], x)
    cols = np.column_stack([d["state_before"][ok, 0], d["pre"][ok, 0] - x,
                            d["state_after"][ok, 0], d["post"][ok, 0] - x])
    return EmpiricalDist(cols, names=("state_before", "y", "state_after", "z"))


def wiener_hopf_probe(spec: MapSpec, q: float, N: int, rng, theta0=0, x0: float = 0.0,
                      mesh: float = 1e-3) -> dict:
    """Samples at an independent Exp(q) time: running max, time and state of the
    last max, terminal value, gap to the max and terminal state.

    Extremes within each step of size ``mesh`` come from the Brownian bridge, so
    the max is exact and its time is resolved to half a step."""
    if not q > 0:
        raise ValueError("q must be > 0")
    validate_spec(spec)
    s = as_stream(rng)
    th = initial_states(theta0, N, s.fork(1), spec.n_states)
    xT, jT, mx, gm, jm, mn, _, _, alive, H = K.terminal_batch(
        spec.packed, s.key, np.full(N, float(x0)), th, 0.0, float(q), float(mesh), np.zeros(0), True)
    return {"sup": mx - x0, "g": gm, "theta_at_sup": jm, "xi": xT - x0, "gap": mx - xT,
            "theta": jT, "e_q": H, "inf": mn - x0, "alive": alive}


def drift_rate(spec: MapSpec, T: float, N: int, rng, z: float = 3.0) -> dict:
    """Mean of xi_T / T from the stationary start, with a z-sigma confidence interval,
    next to the analytic long-run speed."""
    validate_spec(spec)
    s = as_stream(rng)
    pi = stationary_pi(spec.Q)
    th = initial_states(pi, N, s.fork(1), spec.n_states)
    xT, *_ = K.terminal_batch(spec.packed, s.key, np.zeros(N), th, float(T), 0.0, np.inf,
                              np.zeros(0), False)
    v = xT / T
    m = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(N))
    return {"mean": m, "se": se, "ci": (m - z * se, m + z * se), "analytic": spec.mean_drift(pi),
            "T": T, "N": N}


def excursion_growth(spec: MapSpec, T: float, N: int, rng) -> dict:
    """Medians of the running max and of minus the running min at T/4 and T."""
    s = as_stream(rng)
    pi = stationary_pi(spec.Q)
    th = initial_states(pi, N, s.fork(1), spec.n_states)
    out = K.terminal_batch(spec.packed, s.key, np.zeros(N), th, float(T), 0.0, np.inf,
                           np.array([T / 4.0]), True)
    mx, mn, mxc, mnc = out[2], out[5], out[6], out[7]
    return {"max_ratio": float(np.median(mx) / max(np.median(mxc[:, 0]), 1e-300)),
            "min_ratio": float(np.median(-mn) / max(np.median(-mnc[:, 0]), 1e-300)),
            "frac_both_exceed_5": float(np.mean((mx > 5) & (mn < -5)))}


def classify_trichotomy(mean: float, ci: tuple, growth: dict | None = None,
                        width_threshold: float = 0.05, growth_ratio: float = 1.5) -> str:
    """drifts_up / drifts_down when the CI excludes 0; oscillates when it contains
    0, is narrower than ``width_threshold`` and both the max and minus the min
    keep growing (median ratio between T/4 and T above ``growth_ratio``);
    inconclusive otherwise."""
    lo, hi = ci
    if lo > 0:
        return "drifts_up"
    if hi < 0:
        return "drifts_down"
    if hi - lo > width_threshold or growth is None:
        return "inconclusive"
    if growth["max_ratio"] > growth_ratio and growth["min_ratio"] > growth_ratio:
        return "oscillates"
    return "inconclusive"


def trichotomy(spec: MapSpec, T: float, N: int, rng, width_threshold: float = 0.05) -> dict:
    s = as_stream(rng)
    dr = drift_rate(spec, T, N, s.fork(1))
    gr = excursion_growth(spec, T, N, s.fork(2))
    label = classify_trichotomy(dr["mean"], dr["ci"], gr, width_threshold)
    return {"label": label, **dr, **gr}


def vigon_check(levy_spec: MapSpec, y_grid, N: int, rng, mesh: float = 0.05, t_min: float = 10.0,
                gap_stop: float = 15.0, t_cap: float = 2000.0, zbin: float = 1e-2,
                zmax: float = 50.0, chunks: int = 64) -> dict:
    """Both sides of Pi+(y, inf)/d+ = (2/sigma^2) int Pi(z + y, inf) u-(z) dz.

    Left: ladder jumps whose overshoot above the previous max exceeds y, per
    unit of creeping gain of the max.  Right: the jump tail integrated against
    the creeping occupation density u- of the running min.  Both are
    normalization free.  Returns per-y values, standard errors and ratios plus
    the binned occupation (bin width ``zbin``)."""
    validate_spec(levy_spec)
    if levy_spec.n_states != 1:
        raise ValueError("the identity is checked for one-state specs")
    sig = float(levy_spec.sigma[0])
    if sig <= 0:
        raise ValueError("needs a Gaussian component (creeping in both directions)")
    y = np.asarray(y_grid, float)
    s = as_stream(rng)
    nb = int(round(zmax / zbin))
    creep, cnt, rhs, hist = K.vigon_batch(levy_spec.packed, s.key, int(N), float(t_min),
                                          float(gap_stop), float(t_cap), float(mesh), y,
                                          float(zbin), nb, int(chunks))
    c = 2.0 / sig**2
    dbar = creep.mean()
    lhs = cnt.mean(axis=0) / dbar
    lhs_se = np.array([(cnt[:, k] - lhs[k] * creep).std(ddof=1) for k in range(y.size)]) / (
        dbar * math.sqrt(N))
    r = c * rhs.mean(axis=0)
    r_se = c * rhs.std(axis=0, ddof=1) / math.sqrt(N)
    ratio = lhs / np.where(r > 0, r, np.nan)
    ratio_se = np.abs(ratio) * np.sqrt((lhs_se / np.where(lhs > 0, lhs, np.nan))**2
                                       + (r_se / np.where(r > 0, r, np.nan))**2)
    return {"y": y, "lhs": lhs, "lhs_se": lhs_se, "rhs": r, "rhs_se": r_se, "ratio": ratio,
            "ratio_se": ratio_se, "occupation": hist.sum(axis=0) / N, "zbin": zbin, "N": N}
