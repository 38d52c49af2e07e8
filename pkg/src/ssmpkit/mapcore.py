"""Finite-state Markov additive processes: model description, validation,
characteristic matrix exponent, stationary law, duals and path simulation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from ._io import write_csv
from .rng import RngStream, as_stream

try:  # python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover
    import tomli as _toml
import tomli_w


class SpecError(ValueError):
    """Invalid MAP description; the message names the offending index."""


# ---------------------------------------------------------------- jump laws

_KINDS = ("none", "point_mass", "exponential", "two_sided_exponential", "empirical")


@dataclass(frozen=True)
class JumpLaw:
    """Law of a single jump.  Use the constructors, not the raw fields."""
    kind: str = "none"
    params: tuple = ()
    samples: tuple = ()

    @staticmethod
    def none() -> "JumpLaw":
        return JumpLaw("none")

    @staticmethod
    def point_mass(c: float) -> "JumpLaw":
        return JumpLaw("point_mass", (float(c),))

    @staticmethod
    def exponential(beta: float, sign: int = 1) -> "JumpLaw":
        return JumpLaw("exponential", (float(beta), 1.0 if sign >= 0 else -1.0))

    @staticmethod
    def two_sided(beta_up: float, beta_down: float, p_up: float) -> "JumpLaw":
        return JumpLaw("two_sided_exponential", (float(beta_up), float(beta_down), float(p_up)))

    @staticmethod
    def empirical(samples) -> "JumpLaw":
        return JumpLaw("empirical", (), tuple(float(v) for v in np.asarray(samples).ravel()))

    def validate(self, where: str = ""):
        loc = f" at {where}" if where else ""
        if self.kind not in _KINDS:
            raise SpecError(f"unknown jump kind {self.kind!r}{loc}")
        p = self.params
        need = {"none": 0, "point_mass": 1, "exponential": 2, "two_sided_exponential": 3, "empirical": 0}
        if len(p) != need[self.kind]:
            raise SpecError(f"malformed {self.kind} jump law{loc}: expected {need[self.kind]} parameters")
        if not all(math.isfinite(v) for v in p):
            raise SpecError(f"non-finite jump parameter{loc}")
        if self.kind == "exponential" and p[0] <= 0:
            raise SpecError(f"exponential jump rate beta must be > 0{loc}")
        if self.kind == "two_sided_exponential":
            if p[0] <= 0 or p[1] <= 0:
                raise SpecError(f"two-sided jump rates must be > 0{loc}")
            if not 0.0 <= p[2] <= 1.0:
                raise SpecError(f"p_up must lie in [0, 1]{loc}")
        if self.kind == "empirical":
            if len(self.samples) == 0:
                raise SpecError(f"empirical jump law needs samples{loc}")
            if not all(math.isfinite(v) for v in self.samples):
                raise SpecError(f"non-finite empirical jump sample{loc}")
        return self

    @property
    def is_none(self) -> bool:
        return self.kind == "none"

    def mean(self) -> float:
        p = self.params
        if self.kind == "none":
            return 0.0
        if self.kind == "point_mass":
            return p[0]
        if self.kind == "exponential":
            return p[1] / p[0]
        if self.kind == "two_sided_exponential":
            return p[2] / p[0] - (1 - p[2]) / p[1]
        return float(np.mean(self.samples))

    def tail(self, y):
        """P(J > y), vectorized."""
        y = np.asarray(y, float)
        p = self.params
        if self.kind == "none":
            return (y < 0).astype(float)
        if self.kind == "point_mass":
            return (p[0] > y).astype(float)
        if self.kind == "exponential":
            b, s = p
            if s > 0:
                return np.where(y < 0, 1.0, np.exp(-b * np.maximum(y, 0)))
            return np.where(y < 0, -np.expm1(b * np.minimum(y, 0)), 0.0)
        if self.kind == "two_sided_exponential":
            bu, bd, pu = p
            return np.where(y >= 0, pu * np.exp(-bu * np.maximum(y, 0)),
                            pu + (1 - pu) * -np.expm1(bd * np.minimum(y, 0)))
        s = np.sort(np.asarray(self.samples))
        return 1.0 - np.searchsorted(s, y, side="right") / s.size

    def charfn(self, lam: float) -> complex:
        """E exp(i lam J)."""
        p = self.params
        if self.kind == "none":
            return 1.0 + 0j
        if self.kind == "point_mass":
            return np.exp(1j * lam * p[0])
        if self.kind == "exponential":
            b, s = p
            return b / (b - 1j * lam * s)
        if self.kind == "two_sided_exponential":
            bu, bd, pu = p
            return pu * bu / (bu - 1j * lam) + (1 - pu) * bd / (bd + 1j * lam)
        return complex(np.mean(np.exp(1j * lam * np.asarray(self.samples))))

    def negated(self) -> "JumpLaw":
        p = self.params
        if self.kind == "point_mass":
            return JumpLaw.point_mass(-p[0])
        if self.kind == "exponential":
            return JumpLaw("exponential", (p[0], -p[1]))
        if self.kind == "two_sided_exponential":
            return JumpLaw.two_sided(p[1], p[0], 1.0 - p[2])
        if self.kind == "empirical":
            return JumpLaw("empirical", (), tuple(-v for v in self.samples))
        return self

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        p = self.params
        if self.kind == "none":
            return np.zeros(size)
        if self.kind == "point_mass":
            return np.full(size, p[0])
        if self.kind == "exponential":
            return p[1] * gen.exponential(1.0 / p[0], size)
        if self.kind == "two_sided_exponential":
            up = gen.random(size) < p[2]
            return np.where(up, gen.exponential(1.0 / p[0], size), -gen.exponential(1.0 / p[1], size))
        return gen.choice(np.asarray(self.samples), size)

    # -- serialization
    def to_dict(self) -> dict:
        p = self.params
        if self.kind == "point_mass":
            return {"kind": "point_mass", "c": p[0]}
        if self.kind == "exponential":
            return {"kind": "exponential", "beta": p[0], "sign": int(p[1])}
        if self.kind == "two_sided_exponential":
            return {"kind": "two_sided_exponential", "beta_up": p[0], "beta_down": p[1], "p_up": p[2]}
        if self.kind == "empirical":
            return {"kind": "empirical", "samples": list(self.samples)}
        return {"kind": "none"}

    @staticmethod
    def from_dict(d: dict, where: str = "") -> "JumpLaw":
        d = dict(d)
        kind = d.pop("kind", "none")
        d.pop("rate", None)
        try:
            if kind == "none":
                law = JumpLaw.none()
            elif kind == "point_mass":
                law = JumpLaw.point_mass(d.pop("c"))
            elif kind == "exponential":
                law = JumpLaw.exponential(d.pop("beta"), int(d.pop("sign", 1)))
            elif kind == "two_sided_exponential":
                law = JumpLaw.two_sided(d.pop("beta_up"), d.pop("beta_down"), d.pop("p_up"))
            elif kind == "empirical":
                law = JumpLaw.empirical(d.pop("samples"))
            else:
                raise SpecError(f"unknown jump kind {kind!r} at {where}")
        except KeyError as e:
            raise SpecError(f"malformed {kind} jump law at {where}: missing key {e.args[0]!r}") from None
        if d:
            raise SpecError(f"unknown keys {sorted(d)} in jump law at {where}")
        return law.validate(where)


_KIND_CODE = {k: i for i, k in enumerate(_KINDS)}


# ---------------------------------------------------------------- spec

def _ro(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MapSpec:
    """Finite-state MAP: chain generator Q, per-state drift, Gaussian scale,
    compound-Poisson jumps (rate, law), switch jumps and a killing rate."""
    Q: np.ndarray
    drift: np.ndarray
    sigma: np.ndarray
    jump_rate: np.ndarray
    jumps: tuple
    switch_jumps: tuple = None
    kill_rate: float = 0.0
    partner: "MapSpec | None" = field(default=None, repr=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.array(self.Q, float))
        n = Q.shape[0]
        object.__setattr__(self, "Q", _ro(Q))
        for name in ("drift", "sigma", "jump_rate"):
            object.__setattr__(self, name, _ro(np.atleast_1d(np.array(getattr(self, name), float))))
        jumps = self.jumps
        if jumps is None:
            jumps = (JumpLaw.none(),) * n
        object.__setattr__(self, "jumps", tuple(jumps))
        sw = self.switch_jumps
        if sw is None:
            sw = tuple((JumpLaw.none(),) * n for _ in range(n))
        object.__setattr__(self, "switch_jumps", tuple(tuple(r) for r in sw))
        object.__setattr__(self, "kill_rate", float(self.kill_rate))

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]

    @staticmethod
    def levy(drift=0.0, sigma=1.0, jump_rate=0.0, jump=None, kill_rate=0.0) -> "MapSpec":
        """One-state spec (a Levy process)."""
        return MapSpec([[0.0]], [drift], [sigma], [jump_rate],
                       (jump or JumpLaw.none(),), None, kill_rate)

    def replace(self, **kw) -> "MapSpec":
        d = dict(Q=self.Q, drift=self.drift, sigma=self.sigma, jump_rate=self.jump_rate,
                 jumps=self.jumps, switch_jumps=self.switch_jumps, kill_rate=self.kill_rate,
                 partner=self.partner)
        d.update(kw)
        return MapSpec(**d)

    def same_as(self, other: "MapSpec", tol: float = 0.0) -> bool:
        if self.n_states != other.n_states:
            return False
        for a, b in ((self.Q, other.Q), (self.drift, other.drift), (self.sigma, other.sigma),
                     (self.jump_rate, other.jump_rate)):
            if not np.allclose(a, b, rtol=0, atol=tol):
                return False
        return (self.jumps == other.jumps and self.switch_jumps == other.switch_jumps
                and abs(self.kill_rate - other.kill_rate) <= tol)

    def switch_symmetric(self) -> bool:
        n = self.n_states
        return all(self.switch_jumps[j][k] == self.switch_jumps[k][j] for j in range(n) for k in range(n))

    @cached_property
    def packed(self) -> tuple:
        return pack(self)

    def mean_drift(self, pi=None) -> float:
        """Long-run speed sum_j pi_j (a_j + lam_j E J_j) + sum_{j!=k} pi_j q_jk E Xi_jk."""
        pi = stationary_pi(self.Q) if pi is None else np.asarray(pi)
        n = self.n_states
        v = sum(pi[j] * (self.drift[j] + self.jump_rate[j] * self.jumps[j].mean()) for j in range(n))
        v += sum(pi[j] * self.Q[j, k] * self.switch_jumps[j][k].mean()
                 for j in range(n) for k in range(n) if k != j)
        return float(v)

    # -- serialization
    def to_dict(self) -> dict:
        n = self.n_states
        jl = []
        for j in range(n):
            d = self.jumps[j].to_dict()
            d["rate"] = float(self.jump_rate[j])
            jl.append(d)
        return {
            "states": n,
            "Q": self.Q.tolist(),
            "drift": self.drift.tolist(),
            "sigma": self.sigma.tolist(),
            "jump": jl,
            "switch_jump": [[self.switch_jumps[j][k].to_dict() for k in range(n)] for j in range(n)],
            "kill_rate": self.kill_rate,
        }

    @staticmethod
    def from_dict(d: dict) -> "MapSpec":
        d = dict(d)
        try:
            n = int(d.pop("states"))
            Q = d.pop("Q")
        except KeyError as e:
            raise SpecError(f"missing key {e.args[0]!r}") from None
        drift = d.pop("drift", [0.0] * n)
        sigma = d.pop("sigma", [0.0] * n)
        jl = d.pop("jump", [{"kind": "none"}] * n)
        sw = d.pop("switch_jump", None)
        kill = d.pop("kill_rate", 0.0)
        if d:
            raise SpecError(f"unknown keys {sorted(d)}")
        if len(jl) != n:
            raise SpecError(f"jump table has {len(jl)} entries, expected {n}")
        rates = [float(e.get("rate", 0.0)) for e in jl]
        jumps = tuple(JumpLaw.from_dict(e, f"jump[{j}]") for j, e in enumerate(jl))
        if sw is not None:
            if len(sw) != n or any(len(r) != n for r in sw):
                raise SpecError(f"switch_jump must be {n}x{n}")
            sw = tuple(tuple(JumpLaw.from_dict(e, f"switch_jump[{j}][{k}]") for k, e in enumerate(r))
                       for j, r in enumerate(sw))
        spec = MapSpec(Q, drift, sigma, rates, jumps, sw, kill)
        return validate_spec(spec)

    def save(self, path) -> None:
        Path(path).write_text(tomli_w.dumps(self.to_dict()))

    @staticmethod
    def load(path) -> "MapSpec":
        with open(path, "rb") as fh:
            try:
                return MapSpec.from_dict(_toml.load(fh))
            except _toml.TOMLDecodeError as e:
                raise SpecError(f"{path}: {e}") from None


def validate_spec(spec: MapSpec) -> MapSpec:
    Q = spec.Q
    n = Q.shape[0]
    if Q.ndim != 2 or Q.shape != (n, n) or n < 1:
        raise SpecError(f"Q must be square, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise SpecError("Q has non-finite entries")
    for j in range(n):
        for k in range(n):
            if j != k and Q[j, k] < 0:
                raise SpecError(f"negative off-diagonal at ({j},{k})")
    for j in range(n):
        s = Q[j].sum()
        if abs(s) > 1e-9 * max(1.0, np.abs(Q[j]).sum()):
            raise SpecError(f"row {j} sums to {s:.6g}, not 0")
    for name in ("drift", "sigma", "jump_rate"):
        v = getattr(spec, name)
        if v.shape != (n,):
            raise SpecError(f"{name} has length {v.size}, expected {n}")
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise SpecError(f"non-finite {name} at {bad[0]}")
    for name in ("sigma", "jump_rate"):
        bad = np.flatnonzero(getattr(spec, name) < 0)
        if bad.size:
            raise SpecError(f"negative {name} at {bad[0]}")
    if len(spec.jumps) != n:
        raise SpecError(f"{len(spec.jumps)} jump laws for {n} states")
    for j, law in enumerate(spec.jumps):
        law.validate(f"jump[{j}]")
    if len(spec.switch_jumps) != n or any(len(r) != n for r in spec.switch_jumps):
        raise SpecError(f"switch jumps must be {n}x{n}")
    for j in range(n):
        for k in range(n):
            spec.switch_jumps[j][k].validate(f"switch_jump[{j}][{k}]")
    if not (math.isfinite(spec.kill_rate) and spec.kill_rate >= 0):
        raise SpecError("kill_rate must be finite and >= 0")
    if spec.partner is not None and spec.partner.n_states != n:
        raise SpecError(f"partner has {spec.partner.n_states} states, expected {n}")
    return spec


def pack(spec: MapSpec) -> tuple:
    """Flatten a spec into the tuple layout used by the compiled kernels."""
    n = spec.n_states
    emp = []

    def enc(law):
        kind = _KIND_CODE[law.kind]
        p = np.zeros(3)
        p[:len(law.params)] = law.params
        off, ln = len(emp), len(law.samples)
        emp.extend(law.samples)
        return kind, p, off, ln

    jk = np.zeros(n, np.int64)
    jp = np.zeros((n, 3))
    joff = np.zeros(n, np.int64)
    jlen = np.zeros(n, np.int64)
    for j in range(n):
        jk[j], jp[j], joff[j], jlen[j] = enc(spec.jumps[j])
    sk = np.zeros((n, n), np.int64)
    sp = np.zeros((n, n, 3))
    soff = np.zeros((n, n), np.int64)
    slen = np.zeros((n, n), np.int64)
    for j in range(n):
        for k in range(n):
            sk[j, k], sp[j, k], soff[j, k], slen[j, k] = enc(spec.switch_jumps[j][k])
    Q = np.array(spec.Q, float)
    exit_rate = np.array([Q[j].sum() - Q[j, j] for j in range(n)], float)
    return (Q, exit_rate, np.array(spec.drift, float), np.array(spec.sigma, float),
            np.array(spec.jump_rate, float), jk, jp, joff, jlen, sk, sp, soff, slen,
            np.array([spec.kill_rate]), np.array(emp if emp else [0.0], float))


# ---------------------------------------------------------------- analysis

def stationary_pi(Q) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, float))
    n = Q.shape[0]
    if n == 1:
        return np.ones(1)
    ncomp, _ = connected_components(Q - np.diag(np.diag(Q)) > 0, directed=True, connection="strong")
    if ncomp != 1:
        raise SpecError(f"Q is reducible ({ncomp} communicating classes)")
    A = np.vstack([Q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.any(pi <= 0) or np.abs(pi @ Q).max() > 1e-9:
        raise SpecError("Q has no strictly positive invariant distribution")
    return pi


def char_exponent(spec: MapSpec, j: int, lam: float) -> complex:
    """psi_j(lam) with E exp(i lam xi_t) = exp(-t psi_j(lam)) for the state-j ordinate."""
    a, s, r = spec.drift[j], spec.sigma[j], spec.jump_rate[j]
    return -1j * lam * a + 0.5 * (s * lam) ** 2 + r * (1.0 - spec.jumps[j].charfn(lam))


def matrix_exponent(spec: MapSpec, lam: float) -> np.ndarray:
    """F(lam) = diag(-psi_j(lam)) + (q_jk J_jk(lam)), killing on the diagonal."""
    n = spec.n_states
    F = np.zeros((n, n), complex)
    for j in range(n):
        for k in range(n):
            if j != k:
                F[j, k] = spec.Q[j, k] * spec.switch_jumps[j][k].charfn(lam)
        F[j, j] = spec.Q[j, j] - char_exponent(spec, j, lam) - spec.kill_rate
    return F


def transpose_partner(spec: MapSpec, pi=None) -> MapSpec:
    """Weak-reversibility partner with Q~ = D^-1 Q^T D and Xi~_jk = Xi_kj.

    For finite state spaces this always satisfies F~(lam) = D^-1 F(lam)^T D."""
    pi = stationary_pi(spec.Q) if pi is None else np.asarray(pi, float)
    Qt = (spec.Q.T * pi[None, :]) / pi[:, None]
    n = spec.n_states
    sw = tuple(tuple(spec.switch_jumps[k][j] for k in range(n)) for j in range(n))
    return spec.replace(Q=Qt, switch_jumps=sw, partner=None)


def build_dual(spec: MapSpec, pi=None) -> MapSpec:
    """Spec of the dual (-xi~, Theta~), with xi~ the weak-reversibility partner.

    The partner is ``spec.partner`` when attached; otherwise switch jumps must
    be symmetric and the partner is the time-reversed chain with the same
    ordinate data."""
    validate_spec(spec)
    pi = stationary_pi(spec.Q) if pi is None else np.asarray(pi, float)
    if pi.shape != (spec.n_states,) or np.abs(pi @ spec.Q).max() > 1e-9 or abs(pi.sum() - 1) > 1e-9:
        raise SpecError("pi is not invariant for Q")
    if spec.partner is not None:
        tilde = spec.partner
    else:
        if not spec.switch_symmetric():
            raise SpecError("asymmetric switch jumps: attach an explicit partner spec "
                            "(e.g. transpose_partner) before building the dual")
        tilde = transpose_partner(spec, pi)
    n = spec.n_states
    sw = tuple(tuple(tilde.switch_jumps[j][k].negated() for k in range(n)) for j in range(n))
    dual = MapSpec(tilde.Q, -tilde.drift, tilde.sigma, tilde.jump_rate,
                   tuple(l.negated() for l in tilde.jumps), sw, tilde.kill_rate)
    # the dual's own partner is the negated primal, which makes the map an involution
    back = MapSpec(spec.Q, -spec.drift, spec.sigma, spec.jump_rate,
                   tuple(l.negated() for l in spec.jumps),
                   tuple(tuple(spec.switch_jumps[j][k].negated() for k in range(n)) for j in range(n)),
                   spec.kill_rate)
    return validate_spec(dual.replace(partner=back))


@dataclass
class WRReport:
    max_residual: float
    argmax: tuple
    tol: float
    passed: bool


def weak_reversibility_check(spec, dual_spec, pi=None, lam_grid=(0.5, 1.0, 2.0),
                             t_grid=(0.5, 1.0), tol=1e-8) -> WRReport:
    """max over the grid of |exp(F~(lam) t) - D^-1 exp(F(lam) t)^T D|_inf.

    ``dual_spec`` is the dual as returned by ``build_dual``; the partner's
    exponent is read off it as F~(lam) = F_dual(-lam)."""
    pi = stationary_pi(spec.Q) if pi is None else np.asarray(pi, float)
    D = np.diag(pi)
    Di = np.diag(1.0 / pi)
    worst, arg = 0.0, None
    for lam in lam_grid:
        F = matrix_exponent(spec, lam)
        Ft = matrix_exponent(dual_spec, -lam)
        for t in t_grid:
            r = np.abs(linalg.expm(Ft * t) - Di @ linalg.expm(F * t).T @ D).sum(axis=1).max()
            if r > worst or arg is None:
                worst, arg = float(r), (lam, t)
    return WRReport(worst, arg, tol, worst <= tol)


# ---------------------------------------------------------------- paths

@dataclass(frozen=True, eq=False)
class MapPath:
    """Sampled path of (xi, Theta).

    Samples sit on the mesh plus both sides of every event (a repeated time
    holds the left limit first, then the post-event value).  ``events`` holds
    arrays time, kind (1 switch, 2 jump, 3 kill), pre/post values and states."""
    t: np.ndarray
    xi: np.ndarray
    theta: np.ndarray
    events: dict
    lifetime: float = math.inf
    horizon: float = math.inf
    mesh: float = 0.0

    @property
    def killed(self) -> bool:
        return math.isfinite(self.lifetime)

    def at(self, s, side: str = "right"):
        """Value at times s, linear between samples; ``side="left"`` gives left limits."""
        s = np.atleast_1d(np.asarray(s, float))
        t, x = self.t, self.xi
        last = len(t) - 1
        if side == "right":
            i0 = np.clip(np.searchsorted(t, s, side="right") - 1, 0, last)
            i1 = np.minimum(i0 + 1, last)
        else:
            i1 = np.clip(np.searchsorted(t, s, side="left"), 0, last)
            i0 = np.maximum(i1 - 1, 0)
            i0 = np.where(t[i1] == s, i1, i0)
        t0, t1 = t[i0], t[i1]
        dt = np.where(t1 > t0, t1 - t0, 1.0)
        w = np.where(t1 > t0, np.clip((s - t0) / dt, 0.0, 1.0), 0.0)
        return x[i0] + w * (x[i1] - x[i0])

    def to_csv(self, path) -> None:
        write_csv(path, ("t", "xi", "theta"), (self.t, self.xi, self.theta))


def simulate_map(spec: MapSpec, x0: float, theta0: int, T: float, mesh: float = 1e-3,
                 rng=0, replica: int = 0) -> MapPath:
    validate_spec(spec)
    if not (T > 0 and mesh > 0):
        raise ValueError("need T > 0 and mesh > 0")
    if not 0 <= theta0 < spec.n_states:
        raise ValueError(f"theta0={theta0} out of range")
    key = as_stream(rng).key
    t, x, th, et, ek, e0, e1, j0, j1, life = K.record_path(
        spec.packed, key, int(replica), float(x0), int(theta0), float(T), float(mesh))
    ev = {"time": et, "kind": ek, "pre": e0, "post": e1, "state_pre": j0, "state_post": j1}
    return MapPath(t, x, th, ev, float(life), float(t[-1]) if not math.isfinite(life) else float(life), mesh)


def initial_states(theta0, n: int, rng: RngStream, n_states: int) -> np.ndarray:
    """Replica start states: an index, or a probability vector sampled per replica."""
    if np.ndim(theta0) == 0:
        th = int(theta0)
        if not 0 <= th < n_states:
            raise ValueError(f"theta0={th} out of range")
        return np.full(n, th, np.int64)
    p = np.asarray(theta0, float)
    if p.shape != (n_states,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ValueError("theta0 must be a state index or a probability vector")
    return rng.generator().choice(n_states, size=n, p=p).astype(np.int64)


def terminal_values(spec: MapSpec, x0, theta0, T, N, rng, mesh=1e-3):
    """(xi_T, Theta_T, alive) for N replicas; used by the semigroup and Markov checks."""
    s = as_stream(rng)
    th = initial_states(theta0, N, s.fork(1), spec.n_states)
    out = K.terminal_batch(spec.packed, s.key, np.full(N, float(x0)), th, float(T), 0.0,
                           float(mesh), np.zeros(0), False)
    return out[0], out[1], out[8]
