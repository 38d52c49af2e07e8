"""Planar Brownian motion conditioned to stay in a wedge, and the exponents of
isotropic stable processes.

Brownian motion here has generator (sigma2/2) Laplacian; the log radius in the
clock int dt/|B|^2 is then a Brownian motion with variance sigma2 and, under
the conditioning, drift sigma2 * p.  With sigma2 = 2 this is the exponent
psi(theta) = theta^2 of the log radius and the drift is 2p."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from . import _kernels as K
from .rng import as_stream
from .stats import EmpiricalDist, ks_distance


def exponent_from_eigenvalue(lam1: float, d: int) -> float:
    """p = sqrt(lam1 + (d/2 - 1)^2) - (d/2 - 1)."""
    c = d / 2.0 - 1.0
    return math.sqrt(lam1 + c * c) - c


def _check_span(theta0):
    if not 0 < theta0 < 2 * math.pi:
        raise ValueError("theta0 must lie in (0, 2 pi)")


def eigen_first(theta0: float):
    """(lambda1, m1) of -m'' = lambda m on (0, theta0) with Dirichlet ends."""
    _check_span(theta0)
    k = math.pi / theta0
    return k * k, lambda th: np.sin(k * np.asarray(th, float))


def _shoot(lam, theta0):
    """m(theta0) for -m'' = lam m, m(0) = 0, m'(0) = 1."""
    sol = integrate.solve_ivp(lambda t, y: (y[1], -lam * y[0]), (0.0, theta0), (0.0, 1.0),
                              method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[0, -1]


def eigen_first_numeric(theta0: float, rtol: float = 1e-12):
    """Shooting solver: the smallest lam > 0 where the shot hits zero at theta0,
    bracketed by a scan in sqrt(lam) and refined by Brent's method."""
    _check_span(theta0)
    step = 0.05 / theta0
    a = step
    fa = _shoot(a * a, theta0)
    while True:
        b = a + step
        fb = _shoot(b * b, theta0)
        if fa * fb <= 0:
            break
        a, fa = b, fb
        if a > 1e3:
            raise RuntimeError("no sign change found")
    w = optimize.brentq(lambda s: _shoot(s * s, theta0), a, b, xtol=1e-15, rtol=rtol)
    lam = w * w

    def m1(th):
        th = np.atleast_1d(np.asarray(th, float))
        sol = integrate.solve_ivp(lambda t, y: (y[1], -lam * y[0]), (0.0, theta0), (0.0, 1.0),
                                  method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
        v = sol.sol(np.clip(th, 0.0, theta0))[0]
        return v / sol.sol(theta0 / 2)[0]

    return lam, m1


def cone_exponent(theta0: float, d: int = 2) -> float:
    if d != 2:
        raise NotImplementedError("only d = 2 is supported; use exponent_from_eigenvalue")
    return exponent_from_eigenvalue(eigen_first(theta0)[0], d)


@dataclass(frozen=True)
class ConeModel:
    theta0: float
    d: int = 2
    sigma2: float = 2.0
    lam1: float = field(init=False)
    p: float = field(init=False)

    def __post_init__(self):
        _check_span(self.theta0)
        if self.d != 2:
            raise NotImplementedError("only d = 2 is supported")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be > 0")
        lam, _ = eigen_first(self.theta0)
        object.__setattr__(self, "lam1", lam)
        object.__setattr__(self, "p", exponent_from_eigenvalue(lam, self.d))

    @property
    def k(self) -> float:
        return math.pi / self.theta0

    def m1(self, th):
        return np.sin(self.k * np.asarray(th, float))

    def summary(self) -> dict:
        return {"theta0": self.theta0, "d": self.d, "sigma2": self.sigma2, "lambda1": self.lam1,
                "p": self.p}


def polar_angle(x, y):
    return np.mod(np.arctan2(y, x), 2 * math.pi)


def in_wedge(x, model: ConeModel):
    x = np.asarray(x, float)
    th = polar_angle(x[..., 0], x[..., 1])
    r = np.hypot(x[..., 0], x[..., 1])
    return (r > 0) & (th > 0) & (th < model.theta0)


def harmonic_M(x, model: ConeModel):
    """|x|^p m1(arg x) inside the open wedge, 0 outside and on the boundary."""
    x = np.asarray(x, float)
    r = np.hypot(x[..., 0], x[..., 1])
    th = polar_angle(x[..., 0], x[..., 1])
    inside = in_wedge(x, model)
    val = np.where(inside, r ** model.p * model.m1(np.where(inside, th, 0.0)), 0.0)
    return val[()] if val.ndim == 0 else val


def laplacian_ratio(model: ConeModel, x, h: float = 1e-3) -> float:
    """|Delta_h M(x)| / M(x) with the five-point stencil."""
    x = np.asarray(x, float)
    e = np.array([[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]])
    pts = x[None, :] + e
    m0 = harmonic_M(x, model)
    lap = (harmonic_M(pts, model).sum() - 4 * m0) / h**2
    return float(abs(lap) / m0)


@dataclass
class PlanarPath:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    ok: bool


def simulate_conditioned_bm(model: ConeModel, x0, dt: float, T: float = math.inf,
                            R: float = math.inf, rng=0, replica: int = 0) -> PlanarPath:
    """Euler scheme with drift sigma2 grad log M.  Steps shrink to at most
    dist^2/(25 sigma2) near the boundary and proposals that leave the wedge are
    redrawn, so every recorded point is strictly inside.  Stops at radius R or
    time T."""
    x0 = np.asarray(x0, float)
    if not in_wedge(x0, model):
        raise ValueError("x0 must be inside the wedge")
    if not dt > 0 or not (math.isfinite(T) or math.isfinite(R)):
        raise ValueError("need dt > 0 and a finite T or R")
    Tm = T if math.isfinite(T) else 1e6
    key = as_stream(rng).key
    bt, bx, by, good = K.wedge_cond_path(key, int(replica), model.theta0, model.p, model.sigma2,
                                         float(x0[0]), float(x0[1]), float(dt), float(Tm), float(R))
    if not good:
        raise RuntimeError(f"step size underflow near the apex at t={bt[-1]:.6g}")
    return PlanarPath(bt, bx, by, bool(good))


def martingale_check(model: ConeModel, x0, t: float, N: int, rng, dt: float = 1e-3) -> dict:
    """E[M(B_{t ^ exit})] for unconditioned BM against M(x0); exits between
    steps are caught with the bridge crossing probability of each boundary ray."""
    s = as_stream(rng)
    v = K.wedge_bm_martingale(s.key, model.theta0, model.p, model.sigma2, float(x0[0]),
                              float(x0[1]), float(dt), float(t), int(N))
    m = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(N))
    target = float(harmonic_M(np.asarray(x0, float), model))
    return {"mean": m, "se": se, "target": target, "z": abs(m - target) / se}


def map_drift_check(model: ConeModel, r0: float, R: float, N: int, rng, dt: float = 1e-3,
                    phi0: float | None = None) -> dict:
    """Drift of log|B| in the clock int dt/|B|^2 for the conditioned process,
    estimated by Wald's identity (gain in log radius over clock), against sigma2 p."""
    s = as_stream(rng)
    phi0 = model.theta0 / 2 if phi0 is None else phi0
    ang, clk, lr, el, ok = K.wedge_cond_batch(s.key, model.theta0, model.p, model.sigma2,
                                              float(r0), float(phi0), float(dt), float(R), 1e6, N)
    gain = lr[ok] - math.log(r0)
    est = float(gain.mean() / clk[ok].mean())
    return {"drift": est, "target": model.sigma2 * model.p,
            "rel_err": abs(est / (model.sigma2 * model.p) - 1), "ok_frac": float(ok.mean())}


def exit_angles(model: ConeModel, r0: float, N: int, rng, method: str = "map",
                dt: float = 1e-3, nterms: int = 200, phi0: float | None = None) -> np.ndarray:
    """Angle at the first exit of the unit disc from radius r0.

    ``map``: the clock time to exit is inverse Gaussian (log radius is a
    Brownian motion with drift sigma2 p and variance sigma2) and, independently,
    the angle is drawn from the spectral expansion of the conditioned angular
    transition law at that clock time; both draws are exact.  ``euler``: the
    conditioned diffusion is stepped until radius 1."""
    if not 0 < r0 < 1:
        raise ValueError("r0 must be in (0, 1)")
    s = as_stream(rng)
    phi0 = model.theta0 / 2 if phi0 is None else float(phi0)
    if method == "map":
        L = -math.log(r0)
        mu = model.sigma2 * model.p
        S = s.generator().wald(L / mu, L * L / model.sigma2, size=N)
        return K.wedge_angle_batch(s.fork(1).key, S, phi0, model.theta0, model.sigma2 / 2.0,
                                   int(nterms))
    if method == "euler":
        ang, _, _, _, ok = K.wedge_cond_batch(s.key, model.theta0, model.p, model.sigma2,
                                              float(r0), phi0, float(dt), 1.0, 1e6, N)
        if not ok.all():
            raise RuntimeError(f"{int((~ok).sum())} paths hit the step floor or time cap")
        return ang
    raise ValueError("method must be map or euler")


def apex_exit_law(model: ConeModel, radii, N: int, rng, method: str = "map",
                  dt: float = 1e-3) -> dict:
    """Exit-angle laws of the unit disc from decreasing start radii on the
    bisector, with KS distances between every pair and between consecutive radii."""
    radii = np.asarray(radii, float)
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be decreasing")
    s = as_stream(rng)
    dists = [EmpiricalDist(exit_angles(model, r, N, s.fork(i), method, dt), names=("angle",))
             for i, r in enumerate(radii)]
    m = len(dists)
    pair = {(i, k): ks_distance(dists[i], dists[k]) for i in range(m) for k in range(i + 1, m)}
    return {"radii": radii, "dists": dists, "ks": pair,
            "consecutive": np.array([pair[(i, i + 1)] for i in range(m - 1)])}


class StableExponents:
    """Characteristic exponent of the log radius of an isotropic alpha-stable
    process in R^d and its Wiener-Hopf factors

        Psi(theta) = G((-i theta + alpha)/2) / G(-i theta/2)
                     * G((i theta + d)/2) / G((i theta + d - alpha)/2),
        kappa(lam) = G((lam + alpha)/2) / G(lam/2),
        kappa_hat(lam) = G((lam + d)/2) / G((lam + d - alpha)/2).

    Psi goes through log-gamma (reciprocal gamma at poles); the factors use
    gamma and reciprocal gamma directly."""

    def __init__(self, alpha: float, d: int):
        if not 0 < alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if d < 2:
            raise ValueError("d must be >= 2")
        self.alpha = float(alpha)
        self.d = int(d)

    @staticmethod
    def _pole(z) -> bool:
        z = complex(z)
        return z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real)

    def psi(self, theta):
        th = np.asarray(theta, float)
        a = (-1j * th + self.alpha) / 2
        b = -1j * th / 2
        c = (1j * th + self.d) / 2
        e = (1j * th + self.d - self.alpha) / 2
        out = np.empty(th.shape, complex)
        for idx in np.ndindex(th.shape):
            za, zb, zc, ze = a[idx], b[idx], c[idx], e[idx]
            if self._pole(za) or self._pole(zc):
                raise ValueError(f"gamma pole at theta={th[idx]}")
            if self._pole(zb) or self._pole(ze):
                out[idx] = special.gamma(za) * special.rgamma(zb) * special.gamma(zc) * special.rgamma(ze)
            else:
                out[idx] = np.exp(special.loggamma(za) - special.loggamma(zb)
                                  + special.loggamma(zc) - special.loggamma(ze))
        return out[()] if out.ndim == 0 else out

    def _ratio(self, num, den):
        num = np.asarray(num, complex)
        if any(self._pole(z) for z in np.ravel(num)):
            raise ValueError("gamma pole in the numerator")
        return special.gamma(num) * special.rgamma(np.asarray(den, complex))

    def kappa(self, lam):
        lam = np.asarray(lam, complex)
        return self._ratio((lam + self.alpha) / 2, lam / 2)

    def kappa_hat(self, lam):
        lam = np.asarray(lam, complex)
        return self._ratio((lam + self.d) / 2, (lam + self.d - self.alpha) / 2)

    def factorization_residual(self, thetas) -> float:
        th = np.asarray(thetas, float)
        return float(np.abs(self.psi(th) - self.kappa(-1j * th) * self.kappa_hat(1j * th)).max())


def stable_exponents(alpha: float, d: int) -> StableExponents:
    return StableExponents(alpha, d)
