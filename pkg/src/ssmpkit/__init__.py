"""Markov additive processes, the Lamperti-Kiu transform and entrance laws
of self-similar Markov processes at the origin, by simulation."""
from .mapcore import (JumpLaw, MapPath, MapSpec, SpecError, build_dual, matrix_exponent,
                      simulate_map, stationary_pi, transpose_partner, validate_spec,
                      weak_reversibility_check)
from .rng import RngStream, rng_fork
from .stats import EmpiricalDist, TestReport, ks_distance, wasserstein1

__version__ = "0.1.0"

__all__ = [
    "JumpLaw", "MapPath", "MapSpec", "SpecError", "build_dual", "matrix_exponent",
    "simulate_map", "stationary_pi", "transpose_partner", "validate_spec",
    "weak_reversibility_check", "RngStream", "rng_fork", "EmpiricalDist", "TestReport",
    "ks_distance", "wasserstein1",
]
