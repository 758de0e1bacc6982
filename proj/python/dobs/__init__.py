"""Fixed-gain distributed observers: synthesis, simulation and baselines."""

from ._core import (
    DobsError,
    FixedPointResult,
    GainSet,
    NetworkModel,
    NodeGains,
    Scenario,
    SensorSpec,
    Trace,
    ValidationReport,
    __version__,
    blue,
    build_ring_benchmark,
    centralized_steady_covariance,
    closed_loop_spectral_radius,
    gains_to_json,
    iterate_to_fixed_point,
    load_gains,
    load_scenario,
    parse_gains,
    parse_scenario,
    scenario_to_json,
    simulate,
    synthesize,
    unbiasedness_residual,
    validate,
)

ESTIMATORS = ("centralized", "consensus", "tv_blue", "fixed_gain")

__all__ = [
    "DobsError",
    "ESTIMATORS",
    "FixedPointResult",
    "GainSet",
    "NetworkModel",
    "NodeGains",
    "Scenario",
    "SensorSpec",
    "Trace",
    "ValidationReport",
    "__version__",
    "blue",
    "build_ring_benchmark",
    "centralized_steady_covariance",
    "closed_loop_spectral_radius",
    "gains_to_json",
    "iterate_to_fixed_point",
    "load_gains",
    "load_scenario",
    "parse_gains",
    "parse_scenario",
    "scenario_to_json",
    "simulate",
    "synthesize",
    "unbiasedness_residual",
    "validate",
]
