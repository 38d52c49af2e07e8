"""Lamperti-Kiu transform between MAP paths and self-similar paths.

X_t = exp(xi_{phi(t)}) Theta_{phi(t)}, phi the inverse of A(s) = int_0^s exp(alpha xi_u) du.
Between samples the ordinate is treated as linear in MAP time, and both the
clock and its inverse are integrated exactly for linear pieces, so a forward
and backward pass reproduces the input up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._io import write_csv
from .mapcore import MapPath, MapSpec, initial_states, validate_spec
from .rng import as_stream


class NeverExits(ValueError):
    """The path never leaves the requested ball before its end."""


@dataclass(frozen=True, eq=False)
class SsmpPath:
    """Samples (t_i, r_i, theta_i) of a self-similar path.

    A repeated time holds the left limit first and then the post-jump value.
    ``lifetime`` is finite only for killed paths; ``horizon`` is the last
    recorded time.  ``origin`` marks paths built to start at radius 0."""
    alpha: float
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    lifetime: float = math.inf
    horizon: float = math.inf
    origin: bool = False
    src: np.ndarray | None = None  # index of the MAP sample behind each sample, -1 if interpolated

    @property
    def log_r(self) -> np.ndarray:
        return np.log(self.r)

    def to_csv(self, path) -> None:
        write_csv(path, ("t", "r", "theta"), (self.t, self.r, self.theta))


def additive_clock(path: MapPath, alpha: float) -> np.ndarray:
    """A(t_i) = int_0^{t_i} exp(alpha xi_u) du, exact for linear pieces."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    return K.path_clock(path.t, path.xi, len(path.t), float(alpha))


def _logmean(a, b):
    """(b - a) / (log b - log a), continuous at a == b."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    la, lb = np.log(a), np.log(b)
    d = lb - la
    small = np.abs(d) < 1e-8
    return np.where(small, a * (1 + 0.5 * d), (b - a) / np.where(small, 1.0, d))


def lamperti_kiu(path: MapPath, alpha: float, mesh: float | None = None,
                 max_grid: int = 1_000_000) -> SsmpPath:
    """Self-similar image on the union of the A-images of the MAP samples and a
    uniform grid of step ``mesh`` (default: the MAP mesh) in the new clock.

    The grid step is widened to A_T / max_grid when the new clock runs far
    (A grows like exp(alpha xi)); the MAP samples are always kept."""
    A = additive_clock(path, alpha)
    mesh = max(mesh or path.mesh or 1e-3, A[-1] / max_grid)
    n = len(A)
    g = np.arange(1, int(A[-1] / mesh) + 1) * mesh
    g = g[g < A[-1]]
    seg = np.searchsorted(A, g, side="right") - 1
    keep = A[seg] < g
    g, seg = g[keep], seg[keep]
    x0 = path.xi[seg]
    h = path.t[seg + 1] - path.t[seg]
    slope = (path.xi[seg + 1] - x0) / h
    dA = (g - A[seg]) * np.exp(-alpha * x0)
    ak = alpha * slope
    small = np.abs(ak * dA) < 1e-10
    u = np.where(small, dA * (1 - 0.5 * ak * dA),
                 np.log1p(ak * dA) / np.where(ak == 0, 1.0, ak))
    xg = x0 + slope * u
    times = np.concatenate([A, g])
    xs = np.concatenate([path.xi, xg])
    th = np.concatenate([path.theta, path.theta[seg]])
    order = np.lexsort((np.concatenate([2 * np.arange(n), 2 * seg + 1]), times))
    life = float(A[-1]) if path.killed else math.inf
    src = np.concatenate([np.arange(n), np.full(g.size, -1)])[order]
    return SsmpPath(float(alpha), times[order], np.exp(xs[order]), th[order], life, float(A[-1]),
                    src=src)


def inverse_lamperti(ss: SsmpPath, alpha: float | None = None) -> MapPath:
    alpha = ss.alpha if alpha is None else alpha
    if np.any(ss.r <= 0) or not np.all(np.isfinite(ss.r)):
        raise ValueError("zero radius encountered before the lifetime")
    ra = ss.r ** alpha
    ds = np.diff(ss.t) / _logmean(ra[:-1], ra[1:])
    s = np.concatenate([[0.0], np.cumsum(ds)])
    xi = np.log(ss.r)
    dup = np.flatnonzero(np.diff(ss.t) == 0)
    kind = np.where(ss.theta[dup] != ss.theta[dup + 1], 1, 2)
    ev = {"time": s[dup], "kind": kind, "pre": xi[dup], "post": xi[dup + 1],
          "state_pre": ss.theta[dup], "state_post": ss.theta[dup + 1]}
    life = float(s[-1]) if math.isfinite(ss.lifetime) else math.inf
    mesh = float(np.median(np.diff(s)[np.diff(s) > 0])) if len(s) > 1 else 0.0
    return MapPath(s, xi, ss.theta.copy(), ev, life, float(s[-1]), mesh)


def round_trip_error(path: MapPath, alpha: float, mesh: float | None = None) -> float:
    """max over MAP samples of |xi - xi'| and |t - t'|, where (t', xi') is the same
    sample after a forward and an inverse transform."""
    ss = lamperti_kiu(path, alpha, mesh)
    back = inverse_lamperti(ss, alpha)
    m = ss.src >= 0
    idx = ss.src[m]
    return float(max(np.abs(back.xi[m] - path.xi[idx]).max(), np.abs(back.t[m] - path.t[idx]).max()))


def scale_path(ss: SsmpPath, c: float) -> SsmpPath:
    """Path of (c X_{c^-alpha t})."""
    if not c > 0:
        raise ValueError("c must be > 0")
    f = c ** ss.alpha
    return SsmpPath(ss.alpha, ss.t * f, ss.r * c, ss.theta.copy(), ss.lifetime * f,
                    ss.horizon * f, ss.origin, ss.src)


@dataclass(frozen=True)
class ExitQuadruple:
    state_before: int
    logr_before: float
    state_after: int
    logr_after: float
    time: float
    crept: bool


def exit_quadruple(ss: SsmpPath, r: float) -> ExitQuadruple:
    """State and log radius just before and at the first exit of the radius-r ball."""
    lr = math.log(r)
    lg = ss.log_r
    above = np.flatnonzero(lg > lr)
    if above.size == 0:
        raise NeverExits(f"path never exceeds radius {r}")
    i = int(above[0])
    if i == 0:
        return ExitQuadruple(int(ss.theta[0]), float(lg[0]), int(ss.theta[0]), float(lg[0]), 0.0,
                             False)
    if ss.t[i] == ss.t[i - 1]:
        return ExitQuadruple(int(ss.theta[i - 1]), float(lg[i - 1]), int(ss.theta[i]),
                             float(lg[i]), float(ss.t[i]), False)
    w = (lr - lg[i - 1]) / (lg[i] - lg[i - 1])
    tc = float(ss.t[i - 1] + w * (ss.t[i] - ss.t[i - 1]))
    return ExitQuadruple(int(ss.theta[i - 1]), lr, int(ss.theta[i - 1]), lr, tc, True)


def exit_ensemble(spec: MapSpec, alpha: float, z_radius: float, theta0, r: float, N: int, rng,
                  mesh: float = 1e-3, bridge: bool = True, t_max: float = 1e4) -> dict:
    """Exit of the radius-r ball for N self-similar paths started at radius z.

    Returns arrays: time (new clock), logr_before, logr_after (relative to
    log r), state_before, state_after, crept."""
    validate_spec(spec)
    s = as_stream(rng)
    th = initial_states(theta0, N, s.fork(1), spec.n_states)
    x0 = np.full(N, math.log(z_radius))
    tau, pre, post, jb, ja, crept, clk, _, killed = K.passage_batch(
        spec.packed, s.key, x0, th, np.array([math.log(r)]), float(t_max), float(mesh),
        float(alpha), bool(bridge))
    lr = math.log(r)
    return {"time": clk[:, 0], "logr_before": pre[:, 0] - lr, "logr_after": post[:, 0] - lr,
            "state_before": jb[:, 0], "state_after": ja[:, 0], "crept": crept[:, 0],
            "exited": np.isfinite(tau[:, 0])}
