"""Simulation and pulse optimisation of a two-atom Rydberg-blockade CZ gate."""

from __future__ import annotations

__version__ = "0.1.0"

from .analysis import (
    GateResult,
    accumulate_phases,
    dressed_energies,
    extract_phase_from_state,
    fidelity,
    gate_result,
    rabi_frequency,
    stark_shifts,
)
from .core import (
    TABLE1_INITIAL,
    TABLE1_OPTIMISED,
    TABLE1_SYSTEM,
    TABLE2_INITIAL,
    TABLE2_OPTIMISED,
    TABLE2_REPRODUCED,
    TABLE2_SYSTEM,
    BasisLabel,
    Model,
    PulseParams,
    QuantumState,
    Shape,
    SystemConfig,
    basis,
    initial_state,
    interaction_energy,
    pulse_flattop,
    pulse_gaussian,
    target_state,
)
from .hamiltonian import HamiltonianSnapshot, build_effective, build_full, symmetric_basis_transform
from .motional import fidelity_map, sample_fidelity_at_temperature, temperature_sweep
from .optimizer import OptimizationTrace, ParameterBounds, finite_diff_gradient, objective, optimize
from .propagator import PropagationPlan, Trajectory, propagate, propagate_rk, step_eigen

__all__ = [
    "TABLE1_INITIAL",
    "TABLE1_OPTIMISED",
    "TABLE1_SYSTEM",
    "TABLE2_INITIAL",
    "TABLE2_OPTIMISED",
    "TABLE2_REPRODUCED",
    "TABLE2_SYSTEM",
    "BasisLabel",
    "GateResult",
    "HamiltonianSnapshot",
    "Model",
    "OptimizationTrace",
    "ParameterBounds",
    "PropagationPlan",
    "PulseParams",
    "QuantumState",
    "Shape",
    "SystemConfig",
    "Trajectory",
    "accumulate_phases",
    "basis",
    "build_effective",
    "build_full",
    "dressed_energies",
    "extract_phase_from_state",
    "fidelity",
    "fidelity_map",
    "gate_result",
    "finite_diff_gradient",
    "initial_state",
    "interaction_energy",
    "objective",
    "optimize",
    "propagate",
    "propagate_rk",
    "pulse_flattop",
    "pulse_gaussian",
    "rabi_frequency",
    "sample_fidelity_at_temperature",
    "stark_shifts",
    "step_eigen",
    "symmetric_basis_transform",
    "target_state",
    "temperature_sweep",
]
