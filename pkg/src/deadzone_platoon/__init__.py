"""Deadzone-controlled platoons: simulation and trajectory certification."""

from .certify import CertificationReport, certify_run, chain_error_bounds
from .controller import ClosedLoop, ControllerSpec
from .deadzone import ThresholdSpec, check_threshold_validity
from .disturbance import EdgeDisturbanceMap, benchmark_disturbances
from .energy import QuadraticEnergy
from .graph import DesiredOffsets, SensingGraph, chain_graph, laplacian, solve_reference_positions
from .scenario_file import preset
from .simulate import Scenario, Trajectory, detect, integrate, run

__all__ = [
    "CertificationReport", "ClosedLoop", "ControllerSpec", "DesiredOffsets", "EdgeDisturbanceMap",
    "QuadraticEnergy", "Scenario", "SensingGraph", "ThresholdSpec", "Trajectory", "certify_run",
    "chain_error_bounds", "chain_graph", "check_threshold_validity", "detect", "integrate", "laplacian",
    "benchmark_disturbances", "preset", "run", "solve_reference_positions",
]
