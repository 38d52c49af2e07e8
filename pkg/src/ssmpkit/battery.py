"""Named specs used by the acceptance battery, the CLI and the tests."""
from __future__ import annotations

import math

from .cones import ConeModel
from .mapcore import JumpLaw, MapSpec, transpose_partner


def wr2() -> MapSpec:
    """Two states, all ingredients: Gaussian parts, ordinate jumps of both
    signs, asymmetric switch jumps.  Long-run speed 13/90 > 0.  The
    transposed partner is attached so the dual can be built."""
    s = MapSpec([[-1.0, 1.0], [2.0, -2.0]], [0.3, -0.5], [1.0, 0.6], [0.5, 1.0],
                (JumpLaw.exponential(2.0), JumpLaw.two_sided(1.5, 1.0, 0.6)),
                ((JumpLaw.none(), JumpLaw.point_mass(0.25)),
                 (JumpLaw.exponential(3.0, -1), JumpLaw.none())))
    return s.replace(partner=transpose_partner(s))


def jump_entrance() -> MapSpec:
    """Pure-jump two-state spec: negative drifts, Exp up-jumps, speed 2/3.
    Crossings happen by jumps only, so the stationary undershoot has no atom
    at 0 and the conditioned dual can start from every draw."""
    return MapSpec([[-1.0, 1.0], [1.0, -1.0]], [-1.0, -0.5], [0.0, 0.0], [2.0, 1.5],
                   (JumpLaw.exponential(1.5), JumpLaw.exponential(1.0)))


def slow_exp1() -> MapSpec:
    """Slowly switching two-state spec with Exp(1) up-jumps in both states and
    negative drifts: the overshoot is exactly Exp(1) at every level while the
    state seen at the passage converges slowly."""
    return MapSpec([[-0.05, 0.05], [0.05, -0.05]], [-0.5, -0.1], [0.0, 0.0], [2.0, 1.0],
                   (JumpLaw.exponential(1.0), JumpLaw.exponential(1.0)))


def exp1_cpp() -> MapSpec:
    """Compound Poisson, rate 1, Exp(1) up-jumps."""
    return MapSpec.levy(0.0, 0.0, 1.0, JumpLaw.exponential(1.0))


def vigon_levy() -> MapSpec:
    """Brownian motion with rate-1 Exp(2) up-jumps and no drift."""
    return MapSpec.levy(0.0, 1.0, 1.0, JumpLaw.exponential(2.0))


def bm(drift: float = 0.0, sigma: float = 1.0) -> MapSpec:
    return MapSpec.levy(drift, sigma)


def pi_plus_pair() -> MapSpec:
    """Drifts (2, 0.5), equal Gaussian scale, symmetric switching."""
    return MapSpec([[-1.0, 1.0], [1.0, -1.0]], [2.0, 0.5], [1.0, 1.0], [0.0, 0.0],
                   (JumpLaw.none(), JumpLaw.none()))


def trichotomy_battery() -> list[tuple[str, MapSpec]]:
    sym = MapSpec([[-1.0, 1.0], [1.0, -1.0]], [1.0, -1.0], [0.5, 0.5], [0.0, 0.0],
                  (JumpLaw.none(), JumpLaw.none()))
    down = MapSpec([[-1.0, 1.0], [2.0, -2.0]], [1.0, -3.0], [1.0, 1.0], [0.0, 0.0],
                   (JumpLaw.none(), JumpLaw.none()))
    # two-sided jumps with mean -1/4 compensated by the drift
    flat = MapSpec.levy(0.25, 1.0, 1.0, JumpLaw.two_sided(2.0, 1.0, 0.5))
    return [("unit_drift", bm(1.0, 1.0)), ("symmetric_switch", sym), ("drifts_1_-3", down),
            ("wr2", wr2()), ("jump_entrance", jump_entrance()), ("compensated_jumps", flat)]


def wedge() -> ConeModel:
    return ConeModel(1.5 * math.pi)


SPECS = {"wr2": wr2, "jump_entrance": jump_entrance, "slow_exp1": slow_exp1,
         "exp1_cpp": exp1_cpp, "vigon_levy": vigon_levy, "bm": bm, "pi_plus_pair": pi_plus_pair}


def named(name: str) -> MapSpec:
    try:
        return SPECS[name]()
    except KeyError:
        raise KeyError(f"unknown battery spec {name!r}; known: {sorted(SPECS)}") from None
