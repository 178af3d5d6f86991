"""Monotone schemes, envelopes and assumption checks for nonlocal parabolic
equations whose speed depends on the measure of a strict sublevel set."""
from .analysis import (
    comparison_experiment,
    is_convex_1d_sections,
    is_quasiconvex,
    preservation_experiment,
    relabel_experiment,
)
from .envelopes import EnvelopeParams, envelope_gap_study, power_envelope, quasiconvex_envelope
from .evolve import EvolutionTrajectory, EvolveConfig, cfl_dt, evolve, radial_evolve, step
from .fields import GridSpec, ScalarField, read_snapshot, write_snapshot
from .kernels import BACKEND
from .operators import make_operator
from .oracles import (
    SubsolutionSpec,
    exact_example_solution,
    make_subsolution,
    optimal_trajectory,
    value_from_control,
    verify_conditions_I,
    verify_subsolution,
)
from .reports import ViolationReport
from .sublevel import ObstacleSet, SublevelMeasureIndex, build_index

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EnvelopeParams",
    "EvolutionTrajectory",
    "EvolveConfig",
    "GridSpec",
    "ObstacleSet",
    "ScalarField",
    "SublevelMeasureIndex",
    "SubsolutionSpec",
    "ViolationReport",
    "build_index",
    "cfl_dt",
    "comparison_experiment",
    "envelope_gap_study",
    "evolve",
    "exact_example_solution",
    "is_convex_1d_sections",
    "is_quasiconvex",
    "make_operator",
    "make_subsolution",
    "optimal_trajectory",
    "power_envelope",
    "preservation_experiment",
    "quasiconvex_envelope",
    "radial_evolve",
    "read_snapshot",
    "relabel_experiment",
    "step",
    "value_from_control",
    "verify_conditions_I",
    "verify_subsolution",
    "write_snapshot",
]
