"""Weighted empirical distributions, two-sample distances and test reports."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as _st

from ._io import write_csv
from .rng import RngStream, rng_fork  # noqa: F401  (re-exported)


class EmpiricalDist:
    """Weighted sample cloud; columns are named coordinates (reals or states)."""

    def __init__(self, samples, weights=None, names=None):
        x = np.asarray(samples, float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] == 0:
            raise ValueError("empty sample")
        w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, float)
        if w.shape != (x.shape[0],) or np.any(w < 0) or not np.isfinite(w).all() or w.sum() <= 0:
            raise ValueError("weights must be nonnegative, finite and not all zero")
        self.samples = x
        self.weights = w / w.sum()
        self.names = tuple(names) if names is not None else tuple(f"c{i}" for i in range(x.shape[1]))
        if len(self.names) != x.shape[1]:
            raise ValueError("one name per column")

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def unweighted(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def marginal(self, col) -> "EmpiricalDist":
        i = self.names.index(col) if isinstance(col, str) else int(col)
        return EmpiricalDist(self.samples[:, i], self.weights, (self.names[i],))

    def values(self, col=0) -> np.ndarray:
        i = self.names.index(col) if isinstance(col, str) else int(col)
        return self.samples[:, i]

    def mean(self, col=0) -> float:
        return float(self.weights @ self.values(col))

    def histogram(self, col, n_states: int) -> np.ndarray:
        v = self.values(col).astype(int)
        return np.bincount(v, weights=self.weights, minlength=n_states)

    def to_csv(self, path) -> None:
        cols = [self.samples[:, i] for i in range(self.dim)] + [self.weights]
        write_csv(path, self.names + ("weight",), cols)

    def __repr__(self):
        return f"EmpiricalDist(n={self.n}, names={self.names})"


def _as_1d(d):
    if isinstance(d, EmpiricalDist):
        if d.dim != 1:
            raise ValueError(f"expected a 1-d marginal, got dimension {d.dim}")
        return d.samples[:, 0], d.weights
    x = np.asarray(d, float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    return x, np.full(x.size, 1.0 / x.size)


def _cum(w):
    """ECDF heights; exact k/n for equal weights, total mass pinned to 1."""
    if np.all(w == w[0]):
        return np.arange(1, w.size + 1) / w.size
    c = np.cumsum(w)
    return c / c[-1]


def ks_distance(d1, d2) -> float:
    """sup |F1 - F2| of the weighted ECDFs."""
    x1, w1 = _as_1d(d1)
    x2, w2 = _as_1d(d2)
    o1 = np.argsort(x1, kind="stable")
    o2 = np.argsort(x2, kind="stable")
    x1, c1 = x1[o1], _cum(w1[o1])
    x2, c2 = x2[o2], _cum(w2[o2])
    grid = np.union1d(x1, x2)
    F1 = np.concatenate([[0.0], c1])[np.searchsorted(x1, grid, side="right")]
    F2 = np.concatenate([[0.0], c2])[np.searchsorted(x2, grid, side="right")]
    return float(min(1.0, np.abs(F1 - F2).max()))


def wasserstein1(d1, d2) -> float:
    x1, w1 = _as_1d(d1)
    x2, w2 = _as_1d(d2)
    return float(_st.wasserstein_distance(x1, x2, w1, w2))


def ks_pvalue(d1, d2) -> float:
    """Two-sample KS p-value (unweighted samples)."""
    x1, _ = _as_1d(d1)
    x2, _ = _as_1d(d2)
    method = "asymp" if x1.size * x2.size > 10**8 else "auto"
    return float(_st.ks_2samp(x1, x2, method=method).pvalue)


def ks_threshold(n: int, m: int, level: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value: c(level) * sqrt((n+m)/(nm))."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def ks_one_sample(x, cdf) -> tuple[float, float]:
    r = _st.kstest(np.asarray(x, float), cdf)
    return float(r.statistic), float(r.pvalue)


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def corr_se(a, b) -> tuple[float, float]:
    """Sample correlation and its standard error under independence (1/sqrt(n))."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return float(np.corrcoef(a, b)[0, 1]), 1.0 / math.sqrt(a.size)


_RELATIONS = {"<": lambda v, t: v < t, "<=": lambda v, t: v <= t,
              ">": lambda v, t: v > t, ">=": lambda v, t: v >= t}


@dataclass
class TestReport:
    """One checked statistic.  JSON keys: name, value, relation, threshold,
    passed, sizes, seed, extra."""
    __test__ = False

    name: str
    value: float
    relation: str
    threshold: float
    sizes: tuple = ()
    seed: int | None = None
    extra: dict = field(default_factory=dict)
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {sorted(_RELATIONS)}")
        v = float(self.value)
        self.passed = bool(math.isfinite(v) and _RELATIONS[self.relation](v, float(self.threshold)))

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.value:.6g} {self.relation} {self.threshold:.6g}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=float)
