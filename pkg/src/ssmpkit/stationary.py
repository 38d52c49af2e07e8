"""Stationary over/undershoot law, ladder invariant distribution and the
Markov renewal limit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .fluctuation import _check_crossed, passage_arrays
from .mapcore import MapSpec, initial_states, stationary_pi, validate_spec
from .rng import as_stream
from .stats import EmpiricalDist, ks_distance

RHO_NAMES = ("v", "y", "phi", "z")


@dataclass
class RhoEstimate:
    """Per-level quadruple ensembles; the deepest level is the estimate of rho.

    ``cauchy[(i, k)]`` is the largest of the four marginal KS distances between
    levels i and k; ``to_deepest[i]`` is the entry for (i, deepest)."""
    levels: np.ndarray
    dists: list
    cauchy: dict
    to_deepest: np.ndarray

    @property
    def rho(self) -> EmpiricalDist:
        return self.dists[-1]

    def ominus(self) -> EmpiricalDist:
        return self.rho.marginal("z")

    def oplus(self) -> EmpiricalDist:
        return EmpiricalDist(self.rho.samples[:, [1, 0]], self.rho.weights, ("y", "v"))


def quad_distance(d1: EmpiricalDist, d2: EmpiricalDist) -> float:
    return max(ks_distance(d1.marginal(i), d2.marginal(i)) for i in range(d1.dim))


def estimate_rho(spec: MapSpec, theta0, levels, N: int, rng, mesh: float = 1e-3,
                 bridge: bool = False, t_max: float = 1e4) -> RhoEstimate:
    """Quadruples (state before, xi_{tau-} - x, state after, xi_tau - x) at each
    level, each level from an independent stream."""
    levels = np.asarray(levels, float)
    if levels.size == 0 or np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be nonempty and increasing")
    s = as_stream(rng)
    dists = []
    for i, x in enumerate(levels):
        d = passage_arrays(spec, 0.0, theta0, [x], N, s.fork(100 + i), t_max, mesh, bridge)
        ok = _check_crossed(d["tau"][:, 0], x)
        q = np.column_stack([d["state_before"][ok, 0], d["pre"][ok, 0] - x,
                             d["state_after"][ok, 0], d["post"][ok, 0] - x])
        dists.append(EmpiricalDist(q, names=RHO_NAMES))
    m = len(dists)
    cauchy = {(i, k): quad_distance(dists[i], dists[k]) for i in range(m) for k in range(i + 1, m)}
    to_deep = np.array([cauchy[(i, m - 1)] for i in range(m - 1)] + [0.0])
    return RhoEstimate(levels, dists, cauchy, to_deep)


@dataclass(frozen=True)
class ExpDensity:
    """z -> beta exp(-beta z) on (0, inf)."""
    beta: float

    def __call__(self, z):
        z = np.asarray(z, float)
        return np.where(z >= 0, self.beta * np.exp(-self.beta * np.maximum(z, 0.0)), 0.0)

    def cdf(self, z):
        z = np.asarray(z, float)
        return np.where(z > 0, -np.expm1(-self.beta * np.maximum(z, 0.0)), 0.0)


def rho_ominus_closed_form(beta: float) -> ExpDensity:
    """Stationary overshoot density for state-independent Exp(beta) up-jumps."""
    if not beta > 0:
        raise ValueError("beta must be > 0")
    return ExpDensity(float(beta))


def _local_time_mode(spec: MapSpec, mode: str) -> int:
    if mode == "creep":
        return 0
    if mode == "count":
        return 1
    if mode != "auto":
        raise ValueError("mode must be auto, creep or count")
    return 0 if np.any(spec.sigma > 0) or np.any(spec.drift > 0) else 1


@dataclass
class PiPlusEstimate:
    """Ladder skeleton state histograms at h and h/2, their total variation gap,
    the long-run local-time fractions by state and the mean ladder rate mu+."""
    h: float
    dist: EmpiricalDist
    dist_half: EmpiricalDist
    tv: float
    se: np.ndarray
    local_time: np.ndarray
    local_time_se: np.ndarray
    mu_plus: float
    mode: int

    @property
    def probs(self) -> np.ndarray:
        return self.dist.histogram(0, len(self.se))


def _skeleton(spec, theta0, y_top, N, s, h, mode, t_cap, mesh, wlo=None, whi=None):
    th = initial_states(theta0, N, s.fork(1), spec.n_states)
    wlo = np.zeros(0) if wlo is None else np.asarray(wlo, float)
    whi = np.zeros(0) if whi is None else np.asarray(whi, float)
    return K.skeleton_batch(spec.packed, s.key, np.zeros(N), th, float(y_top), float(t_cap),
                            float(mesh), float(h), int(mode), wlo, whi)


def _ratio_se(num, den):
    """Ratio of means sum(num)/sum(den) with its delta-method standard error."""
    r = num.sum() / den.sum()
    se = (num - r * den).std(ddof=1) / (den.mean() * math.sqrt(num.size))
    return float(r), float(se)


def estimate_pi_plus(spec: MapSpec, h_ladder: float, N: int, rng, theta0=None,
                     y_top: float = 50.0, mode: str = "auto", mesh: float = 0.05,
                     t_cap: float = 1e5) -> PiPlusEstimate:
    """State at the epochs where the running max passes each multiple of h
    (creeping) or at each ladder jump epoch, pooled over N runs to height y_top.

    The skeleton weights states by ladder height gained; it matches the local
    time invariant law when the creeping rate does not depend on the state.
    Runs at h and h/2 use independent streams; a third stream gives the exact
    local time fractions and mu+ (height gained per unit local time).  Maxima
    within each step come from the Brownian bridge, so ``mesh`` only sets the
    work per path, not the accuracy."""
    if not h_ladder > 0:
        raise ValueError("h_ladder must be > 0")
    validate_spec(spec)
    n = spec.n_states
    if theta0 is None:
        theta0 = stationary_pi(spec.Q)
    md = _local_time_mode(spec, mode)
    s = as_stream(rng)
    hists = []
    for k, h in enumerate((h_ladder, h_ladder / 2)):
        _, _, skel, _, _ = _skeleton(spec, theta0, y_top, N, s.fork(10 + k), h, md, t_cap, mesh)
        hists.append(skel)
    tot = hists[0].sum(axis=0)
    tot2 = hists[1].sum(axis=0)
    if tot.sum() <= 0 or tot2.sum() <= 0:
        raise ValueError("no ladder epochs recorded; increase y_top or N")
    d1 = EmpiricalDist(np.arange(n), tot, ("state",))
    d2 = EmpiricalDist(np.arange(n), tot2, ("state",))
    tv = 0.5 * float(np.abs(d1.weights - d2.weights).sum())
    sk = hists[0]
    se = np.array([_ratio_se(sk[:, v], sk.sum(axis=1))[1] for v in range(n)])
    L, height, _, lt, _ = _skeleton(spec, theta0, y_top, N, s.fork(20), h_ladder, md, t_cap, mesh)
    lfr = np.array([_ratio_se(lt[:, v], L) for v in range(n)])
    mu = float(height.sum() / L.sum())
    return PiPlusEstimate(h_ladder, d1, d2, tv, se, lfr[:, 0], lfr[:, 1], mu, md)


def renewal_limit_check(spec: MapSpec, g, y_grid, N: int, rng, theta0=0, mode: str = "auto",
                        mesh: float = 0.05, long_height: float | None = None,
                        t_cap: float = 1e5) -> dict:
    """Compare E sum over ladder points with height in [y - 1, y) of g(state)
    against (1/mu+) sum_v g(v) pi+(v).

    ``g`` is a per-state weight vector (the test function is g(v) 1{z in [0,1]}).
    Ladder points are weighted by creeping local time or counted, per ``mode``.
    pi+ and mu+ come from an independent long run from the stationary law."""
    validate_spec(spec)
    n = spec.n_states
    gv = np.broadcast_to(np.asarray(g, float), (n,)).copy()
    y = np.asarray(y_grid, float)
    if np.any(y < 1):
        raise ValueError("y_grid values must be >= 1")
    md = _local_time_mode(spec, mode)
    s = as_stream(rng)
    _, _, _, _, win = _skeleton(spec, theta0, y.max() + 1e-9, N, s.fork(1), 1.0, md, t_cap,
                                mesh, y - 1.0, y)
    occ = win @ gv
    lhs = occ.mean(axis=0)
    lhs_se = occ.std(axis=0, ddof=1) / math.sqrt(N)
    hl = long_height or max(20.0 * y.max(), 200.0)
    nl = max(N // 10, 100)
    L, height, _, lt, _ = _skeleton(spec, stationary_pi(spec.Q), hl, nl, s.fork(2), 1.0, md,
                                    t_cap, mesh)
    mu = float(height.sum() / L.sum())
    pi_plus = lt.sum(axis=0) / lt.sum()
    rhs, rhs_se = _ratio_se(lt @ gv, height)
    return {"y": y, "lhs": lhs, "lhs_se": lhs_se, "rhs": rhs, "rhs_se": rhs_se, "mu_plus": mu,
            "pi_plus": pi_plus, "mode": md, "N": N}


def sample_rho_oplus(spec: MapSpec, x_deep: float, N: int, rng, theta0=0, mesh: float = 1e-3,
                     bridge: bool = True, t_max: float = 1e4) -> EmpiricalDist:
    """(xi_{tau-} - x, state before) at the first passage above x_deep."""
    d = passage_arrays(spec, 0.0, theta0, [x_deep], N, rng, t_max, mesh, bridge)
    ok = _check_crossed(d["tau"][:, 0], x_deep)
    return EmpiricalDist(np.column_stack([d["pre"][ok, 0] - x_deep, d["state_before"][ok, 0]]),
                         names=("y", "v"))
