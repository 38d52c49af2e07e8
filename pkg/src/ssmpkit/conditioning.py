"""Harmonic function for conditioning, the dual conditioned to stay negative and
entrance paths at the origin by time reversal."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .fluctuation import _check_crossed, passage_arrays
from .lamperti import ExitQuadruple, NeverExits, SsmpPath, exit_quadruple, lamperti_kiu  # noqa: F401
from .mapcore import MapPath, MapSpec, build_dual, initial_states, stationary_pi, validate_spec
from .rng import as_stream
from .stats import ks_distance

__all__ = ["ConditioningError", "HplusEstimate", "EntranceSample", "estimate_Hplus",
           "hplus_bm", "sample_conditioned_negative", "conditioned_marginal",
           "build_entrance_path", "entrance_ensemble", "exit_quadruple", "reverse_path",
           "convergence_diagnostic"]

MIN_ACCEPT = 1e-3


class ConditioningError(RuntimeError):
    """Refused or failed conditioning (wrong drift sign, acceptance too low)."""


def _dual_drift(dual_spec: MapSpec) -> float:
    return dual_spec.mean_drift(stationary_pi(dual_spec.Q))


def _need_negative_drift(dual_spec: MapSpec) -> float:
    m = _dual_drift(dual_spec)
    if not m < 0:
        raise ConditioningError(f"dual long-run drift {m:.6g} is not negative: the probability "
                                "of never going above 0 is identically 0")
    return m


@dataclass
class HplusEstimate:
    """P(dual never exceeds 0 | start (y, state)) on y_grid x states.

    ``values[i, k]`` is for states[i] and y_grid[k]; ``values_2T`` repeats the
    estimate at horizon 2T and ``bias`` is the largest gap between the two."""
    y_grid: np.ndarray
    states: np.ndarray
    values: np.ndarray
    se: np.ndarray
    method: str
    T: float
    values_2T: np.ndarray | None = None

    @property
    def bias(self) -> float:
        if self.values_2T is None:
            return 0.0
        return float(np.abs(self.values - self.values_2T).max())


def hplus_bm(m: float, sigma: float, y):
    """1 - exp(-(2|m|/sigma^2)|y|) for y < 0, 0 for y >= 0 (Brownian dual, m < 0)."""
    y = np.asarray(y, float)
    k = 2.0 * abs(m) / sigma**2
    return np.where(y < 0, -np.expm1(-k * np.abs(y)), 0.0)


def _sup_fraction(dual_spec, th, T, N, s, y):
    out = K.terminal_batch(dual_spec.packed, s.key, np.zeros(N), th, float(T), 0.0, np.inf,
                           np.zeros(0), True)
    alive = out[8]
    sup = out[2]
    # common random numbers across y: sup from y is y + sup from 0, so the
    # estimate is exactly monotone in y
    ok = (sup[:, None] < -y[None, :]) & alive[:, None]
    return ok.mean(axis=0), ok.std(axis=0, ddof=1) / math.sqrt(N)


def estimate_Hplus(dual_spec: MapSpec, y_grid, states, T: float, N: int, rng) -> HplusEstimate:
    """Fraction of N dual paths from (y, state) that stay <= 0 through T, at T and 2T.

    Intra-segment maxima come from the Brownian bridge, so the sup over [0, T]
    is exact; the only bias is the finite horizon."""
    validate_spec(dual_spec)
    m = _need_negative_drift(dual_spec)
    if T < 50.0 / abs(m):
        raise ValueError(f"T={T} is below 50/|drift| = {50.0 / abs(m):.6g}")
    y = np.asarray(y_grid, float)
    sts = np.atleast_1d(np.asarray(states, np.int64))
    s = as_stream(rng)
    vals = np.zeros((sts.size, y.size))
    se = np.zeros_like(vals)
    v2 = np.zeros_like(vals)
    for i, v in enumerate(sts):
        th = initial_states(int(v), N, s, dual_spec.n_states)
        vals[i], se[i] = _sup_fraction(dual_spec, th, T, N, s.fork(2 * i + 1), y)
        v2[i], _ = _sup_fraction(dual_spec, th, 2 * T, N, s.fork(2 * i + 2), y)
    return HplusEstimate(y, sts, vals, se, "horizon-MC", float(T), v2)


def _is_bm_levy(spec: MapSpec) -> bool:
    return (spec.n_states == 1 and spec.sigma[0] > 0 and spec.drift[0] < 0
            and (spec.jump_rate[0] == 0 or spec.jumps[0].is_none()) and spec.kill_rate == 0)


def _t_check(dual_spec, T_check):
    m = _need_negative_drift(dual_spec)
    return 50.0 / abs(m) if T_check is None else float(T_check)


@dataclass
class ConditionedPath:
    path: MapPath
    attempts: int
    scheme: str


def sample_conditioned_negative(dual_spec: MapSpec, y0: float, theta0: int = 0,
                                scheme: str = "rejection", rng=0, replica: int = 0,
                                T_check: float | None = None, K_stop: float = 12.0,
                                mesh: float = 1e-3, T: float | None = None) -> ConditionedPath:
    """One path of the dual conditioned to stay negative.

    ``rejection`` restarts until the path stays <= 0 through T_check and ends
    below -K_stop; more than 1000 failed attempts (acceptance < 1e-3) aborts.
    ``h_transform_levy`` runs the exact conditioned diffusion for a one-state
    Brownian dual with negative drift, to time T or until below -K_stop."""
    if not y0 < 0:
        raise ValueError("y0 must be < 0")
    validate_spec(dual_spec)
    key = as_stream(rng).key
    if scheme == "rejection":
        tc = _t_check(dual_spec, T_check)
        n_max = int(round(1.0 / MIN_ACCEPT))
        bt, bx, bj, att = K.neg_path(dual_spec.packed, key, int(replica), float(y0), int(theta0),
                                     float(K_stop), tc, float(mesh), n_max)
        if att < 0:
            raise ConditioningError(f"acceptance below {MIN_ACCEPT} after {n_max} attempts from "
                                    f"y0={y0}; start deeper (lower y0)")
        return ConditionedPath(_record_to_path(bt, bx, bj, mesh), int(att), scheme)
    if scheme == "h_transform_levy":
        if not _is_bm_levy(dual_spec):
            raise ValueError("h_transform_levy needs a one-state Brownian dual with negative drift")
        Tm = 1e4 if T is None else float(T)
        bt, bx = K.htrans_path(key, int(replica), float(dual_spec.drift[0]),
                               float(dual_spec.sigma[0]), float(y0), float(mesh), Tm, -float(K_stop))
        return ConditionedPath(_record_to_path(bt, bx, np.zeros(bt.size, np.int64), mesh), 1, scheme)
    raise ValueError("scheme must be rejection or h_transform_levy")


def _record_to_path(bt, bx, bj, mesh) -> MapPath:
    dup = np.flatnonzero(np.diff(bt) == 0)
    kind = np.where(bj[dup] != bj[dup + 1], 1, 2)
    ev = {"time": bt[dup], "kind": kind, "pre": bx[dup], "post": bx[dup + 1],
          "state_pre": bj[dup], "state_post": bj[dup + 1]}
    return MapPath(bt, bx, bj, ev, math.inf, float(bt[-1]), mesh)


def conditioned_marginal(dual_spec: MapSpec, y0: float, theta0: int, t: float, N: int, rng,
                         scheme: str = "rejection", T_check: float | None = None,
                         K_stop: float = 12.0, mesh: float = 1e-3) -> np.ndarray:
    """N samples of xi_t under the conditioned law."""
    if not y0 < 0:
        raise ValueError("y0 must be < 0")
    s = as_stream(rng)
    if scheme == "h_transform_levy":
        if not _is_bm_levy(dual_spec):
            raise ValueError("h_transform_levy needs a one-state Brownian dual with negative drift")
        return K.htrans_obs_batch(s.key, float(dual_spec.drift[0]), float(dual_spec.sigma[0]),
                                  np.full(N, float(y0)), float(mesh), float(t))
    tc = _t_check(dual_spec, T_check)
    # the stay-negative test uses the exact bridge maximum and t is a stopping
    # point, so unit steps lose nothing; ``mesh`` only matters for h_transform_levy
    xo, att = K.neg_obs_batch(dual_spec.packed, s.key, np.full(N, float(y0)),
                              np.full(N, int(theta0), np.int64), float(K_stop), tc, 1.0,
                              float(t), 10**6)
    _check_acceptance(att, y0)
    return xo


def _check_acceptance(att, where):
    tot = np.abs(att).sum()
    if np.any(att < 0) or (tot >= 1000 and np.sum(att > 0) / tot < MIN_ACCEPT):
        raise ConditioningError(f"rejection acceptance {np.sum(att > 0) / tot:.3g} below "
                                f"{MIN_ACCEPT} (start {where}); start deeper (lower y0)")


def reverse_path(ss: SsmpPath, zeta: float | None = None) -> SsmpPath:
    """Time reversal t -> zeta - t; repeated times keep the left limit first."""
    z = ss.t[-1] if zeta is None else zeta
    src = None if ss.src is None else ss.src[::-1].copy()
    return SsmpPath(ss.alpha, z - ss.t[::-1], ss.r[::-1].copy(), ss.theta[::-1].copy(),
                    math.inf, float(z - ss.t[0]), True, src)


@dataclass
class EntranceSample:
    """Self-similar path from (near) the origin, ending at radius e^y just
    before it leaves the unit ball.  ``truncation`` bounds the clock mass lost
    by stopping the dual at -K_stop (exp(alpha xi_end) per unit of residual
    time)."""
    path: SsmpPath
    eps0: float
    K_stop: float
    y: float
    theta: int
    truncation: float
    attempts: int


def _dual_for(spec: MapSpec) -> MapSpec:
    dual = build_dual(spec)
    _need_negative_drift(dual)
    return dual


def build_entrance_path(spec: MapSpec, alpha: float, K_stop: float = 12.0,
                        eps0: float | None = None, rng=0, x_deep: float = 20.0, theta0=0,
                        mesh: float = 1e-3, replica: int = 0,
                        T_check: float | None = None) -> EntranceSample:
    """(1) draw (y, state) from the stationary undershoot law at level x_deep;
    (2) run the dual conditioned to stay negative from there until below -K_stop;
    (3) map it through the Lamperti-Kiu transform; (4) reverse it in time."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    eps0 = math.exp(-K_stop) if eps0 is None else float(eps0)
    Ks = max(K_stop, -math.log(eps0))
    dual = _dual_for(spec)
    s = as_stream(rng).fork(int(replica))
    d = passage_arrays(spec, 0.0, theta0, [x_deep], 1, s.fork(1), mesh=mesh, bridge=True)
    if not np.isfinite(d["tau"][0, 0]):
        raise ConditioningError(f"level {x_deep} not crossed")
    y = float(d["pre"][0, 0] - x_deep)
    v = int(d["state_before"][0, 0])
    if y >= 0:
        raise ConditioningError("undershoot 0 (creeping passage): the conditioned dual cannot "
                                "start at 0; this construction needs crossings by jumps")
    tc = _t_check(dual, T_check)
    bt, bx, bj, att = K.neg_path(dual.packed, s.fork(2).key, 0, y, v, float(Ks), tc,
                                 float(mesh), 10**6)
    if att < 0:
        raise ConditioningError(f"rejection failed from y={y}")
    path = _record_to_path(bt, bx, bj, mesh)
    ss = lamperti_kiu(path, alpha, mesh=np.inf)
    rev = reverse_path(ss)
    return EntranceSample(rev, eps0, float(Ks), y, v, float(math.exp(alpha * bx[-1])), int(att))


def entrance_ensemble(spec: MapSpec, alpha: float, N: int, rng, log_r: float = 0.0,
                      log_deltas=(), K_stop: float = 12.0, x_deep: float = 20.0, theta0=0,
                      T_check: float | None = None, mesh: float = 1e-3,
                      max_attempts: int = 10**6) -> dict:
    """Batch version of the entrance construction.

    Returns the exit quadruple of the radius e^log_r ball (log radii relative
    to log_r), the exit of the unit ball, exit times of radii e^log_deltas,
    lifetimes, attempts and truncation scales, plus the (y, state) draws.
    Every sample uses its own passage record for the stationary undershoot."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    dual = _dual_for(spec)
    s = as_stream(rng)
    d = passage_arrays(spec, 0.0, theta0, [x_deep], N, s.fork(1), mesh=mesh, bridge=True)
    ok = _check_crossed(d["tau"][:, 0], x_deep)
    y0 = d["pre"][ok, 0] - x_deep
    v0 = d["state_before"][ok, 0].astype(np.int64)
    if np.any(y0 >= 0):
        raise ConditioningError("creeping passages present: the conditioned dual cannot start "
                                "at 0; this construction needs crossings by jumps")
    tc = _t_check(dual, T_check)
    ld = np.sort(np.asarray(log_deltas, float))
    quad, exit1, tau, life, att, trunc = K.entrance_batch(
        dual.packed, spec.packed, s.fork(2).key, y0, v0, float(K_stop), tc, float(mesh),
        float(alpha), float(log_r), ld, int(max_attempts))
    _check_acceptance(att, "stationary undershoot")
    return {"quad": quad, "exit1": exit1, "tau": tau, "log_deltas": ld, "lifetime": life,
            "attempts": att, "truncation": trunc, "y0": y0, "theta0": v0}


def convergence_diagnostic(spec: MapSpec, alpha: float, z_radii, deltas, N: int, rng,
                           theta0=0, K_stop: float = 12.0, x_deep: float = 20.0,
                           mesh: float = 1e-3, entrance: dict | None = None) -> dict:
    """(i) per start radius z, KS distances between the four exit marginals of
    the unit ball under P_z and under the entrance construction; (ii) per z and
    delta, E[tau_delta ^ 1] under P_z (exit time of the radius-delta ball)."""
    from .lamperti import exit_ensemble
    z_radii = np.asarray(z_radii, float)
    deltas = np.asarray(deltas, float)
    s = as_stream(rng)
    if entrance is None:
        entrance = entrance_ensemble(spec, alpha, N, s.fork(1), 0.0, (), K_stop, x_deep, theta0,
                                     mesh=mesh)
    q0 = entrance["quad"]
    ks = np.zeros((z_radii.size, 4))
    tmean = np.full((z_radii.size, deltas.size), np.nan)
    for i, z in enumerate(z_radii):
        e = exit_ensemble(spec, alpha, z, theta0, 1.0, N, s.fork(10 + i), mesh=mesh)
        m = e["exited"]
        cols = (e["state_before"][m], e["logr_before"][m], e["state_after"][m], e["logr_after"][m])
        for c in range(4):
            ks[i, c] = ks_distance(cols[c], q0[:, c])
        for k, dl in enumerate(deltas):
            if dl <= z:
                continue
            th = initial_states(theta0, N, s.fork(100 + i), spec.n_states)
            out = K.passage_batch(spec.packed, s.fork(200 + 10 * i + k).key,
                                  np.full(N, math.log(z)), th, np.array([math.log(dl)]), 1e4,
                                  float(mesh), float(alpha), True)
            clk = out[6][:, 0]
            tmean[i, k] = float(np.mean(np.minimum(np.where(np.isfinite(clk), clk, 1.0), 1.0)))
    return {"z": z_radii, "delta": deltas, "ks": ks, "ks_max": ks.max(axis=1),
            "tau_mean": tmean}
