"""Backcasting of Low Emission Zone ban schedules on an age/type/zone fleet model."""

__version__ = "0.1.0"

from .fleet import FleetState, SimulationTrace, simulate, simulate_batch
from .ga import EmissionTarget, GaConfig, OptimizationOutcome, evolve, pareto_sweep, reference_control
from .oracle import TinyInstance, enumerate_optimal
from .policy import BehaviorParams, ZoneTopology, repair_control, validate_control
from .results import ResultsBundle, write_results
from .scenario import DEFAULT_TARGETS, Scenario, load_scenario

__all__ = [
    "BehaviorParams",
    "EmissionTarget",
    "FleetState",
    "GaConfig",
    "OptimizationOutcome",
    "DEFAULT_TARGETS",
    "ResultsBundle",
    "Scenario",
    "SimulationTrace",
    "TinyInstance",
    "ZoneTopology",
    "enumerate_optimal",
    "evolve",
    "load_scenario",
    "pareto_sweep",
    "reference_control",
    "repair_control",
    "simulate",
    "simulate_batch",
    "validate_control",
    "write_results",
]
