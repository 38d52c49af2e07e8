"""Experiment config files: flat TOML with documented keys, validated before
dispatch.  Every default is filled in so the manifest echoes a complete run."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import battery
from .mapcore import MapSpec, SpecError, validate_spec

KINDS = ("simulate", "passage", "rho", "entrance", "cone", "check")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """kind: one of KINDS.
    spec source (exactly one for MAP kinds): ``battery`` name, ``spec_file``
    path, or an inline ``[spec]`` table.  ``cone`` uses ``wedge_angle``.
    Numeric keys: alpha, N, mesh, T (simulate horizon), t_max, x0, theta0,
    levels (passage, rho), radii (cone), log_r and log_deltas (entrance),
    only (criteria for check)."""
    kind: str
    battery: str | None = None
    spec_file: str | None = None
    spec: dict | None = None
    alpha: float = 1.0
    N: int = 10_000
    mesh: float = 1e-3
    T: float = 5.0
    t_max: float = 1e4
    x0: float = 0.0
    theta0: int = 0
    levels: list = field(default_factory=lambda: [5.0, 10.0, 20.0])
    radii: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    wedge_angle: float = 1.5 * math.pi
    log_r: float = 0.0
    log_deltas: list = field(default_factory=list)
    only: list = field(default_factory=list)
    seed: int | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


_FIELDS = set(ExperimentConfig.__dataclass_fields__)


def _num(d, key, cast, pred, what):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"key '{key}': expected a number, got {v!r}")
    if cast is int and not float(v).is_integer():
        raise ConfigError(f"key '{key}': expected an integer, got {v!r}")
    v = cast(v)
    if not pred(v):
        raise ConfigError(f"key '{key}': must be {what}, got {v!r}")
    return v


def _numlist(d, key, pred, what, increasing=False):
    v = d[key]
    if not isinstance(v, list) or not all(isinstance(u, (int, float)) and not isinstance(u, bool)
                                          for u in v):
        raise ConfigError(f"key '{key}': expected a list of numbers, got {v!r}")
    v = [float(u) for u in v]
    if not all(pred(u) for u in v):
        raise ConfigError(f"key '{key}': entries must be {what}")
    if increasing and any(b <= a for a, b in zip(v, v[1:])):
        raise ConfigError(f"key '{key}': entries must be strictly increasing")
    return v


def from_dict(d: dict, base: Path | None = None) -> ExperimentConfig:
    d = dict(d)
    unknown = sorted(set(d) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}; known: {sorted(_FIELDS)}")
    if "kind" not in d:
        raise ConfigError("missing key 'kind'")
    if d["kind"] not in KINDS:
        raise ConfigError(f"key 'kind': must be one of {list(KINDS)}, got {d['kind']!r}")
    pos = lambda v: v > 0 and math.isfinite(v)  # noqa: E731
    for key, cast, pred, what in (("alpha", float, pos, "> 0"), ("N", int, lambda v: v >= 1, ">= 1"),
                                  ("mesh", float, pos, "> 0"), ("T", float, pos, "> 0"),
                                  ("t_max", float, pos, "> 0"), ("x0", float, math.isfinite, "finite"),
                                  ("theta0", int, lambda v: v >= 0, ">= 0"),
                                  ("wedge_angle", float, lambda v: 0 < v <= 2 * math.pi, "in (0, 2 pi]"),
                                  ("log_r", float, math.isfinite, "finite"),
                                  ("seed", int, lambda v: 0 <= v < 2**64, "an unsigned 64-bit integer")):
        if key in d:
            d[key] = _num(d, key, cast, pred, what)
    if "levels" in d:
        d["levels"] = _numlist(d, "levels", pos, "> 0", increasing=True)
    if "radii" in d:
        d["radii"] = _numlist(d, "radii", pos, "> 0")
    if "log_deltas" in d:
        d["log_deltas"] = _numlist(d, "log_deltas", math.isfinite, "finite")
    if "only" in d:
        d["only"] = [int(u) for u in _numlist(d, "only", lambda u: u in range(1, 13), "in 1..12")]
    srcs = [k for k in ("battery", "spec_file", "spec") if k in d]
    if len(srcs) > 1:
        raise ConfigError(f"give one spec source, got {srcs}")
    if d["kind"] in ("simulate", "passage", "rho", "entrance"):
        if not srcs:
            raise ConfigError(f"kind '{d['kind']}' needs one of 'battery', 'spec_file' or [spec]")
        if "battery" in d and d["battery"] not in battery.SPECS:
            raise ConfigError(f"key 'battery': unknown name {d['battery']!r}; "
                              f"known: {sorted(battery.SPECS)}")
        if "spec_file" in d and base is not None:
            d["spec_file"] = str((base / d["spec_file"]).resolve())
    return ExperimentConfig(**d)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read ({e.strerror})") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        # the decoder reports "(at line L, column C)"
        raise ConfigError(f"{path}: {e}") from None
    try:
        return from_dict(raw, path.parent)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


def resolve_spec(cfg: ExperimentConfig) -> MapSpec:
    """MapSpec named by the config; raises SpecError on an invalid spec."""
    if cfg.battery is not None:
        spec = battery.named(cfg.battery)
    elif cfg.spec_file is not None:
        spec = MapSpec.load(cfg.spec_file)
    else:
        spec = MapSpec.from_dict(cfg.spec)
    validate_spec(spec)
    if cfg.theta0 >= spec.n_states:
        raise SpecError(f"theta0={cfg.theta0} out of range for {spec.n_states} states")
    return spec
