"""Steady-state fidelity of EPR pairs stored in a two-memory node.

Exact distribution from an age-pair Markov chain, plus a seeded Monte Carlo
simulator covering the same policy and a replace-oldest baseline.
"""
from .dtmc import (
    FidelityDistribution,
    LinkState,
    Observables,
    StateSpace,
    SteadyState,
    TransitionMatrix,
    assemble_blocks,
    build_transition_matrix,
    enumerate_states,
    newer_pair_distribution,
    observables,
    older_pair_distribution,
    steady_state_full,
    steady_state_reduced,
)
from .errors import ModelError, SolverError
from .physics import (
    DiscreteModel,
    PhysicalConfig,
    continuous_fidelity_decay,
    derive_discrete_model,
    fidelity_at_age,
    purification_success_prob,
    purified_age,
    purified_fidelity,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteModel", "FidelityDistribution", "LinkState", "ModelError", "Observables",
    "PhysicalConfig", "SolverError", "StateSpace", "SteadyState", "TransitionMatrix",
    "assemble_blocks", "build_transition_matrix", "continuous_fidelity_decay",
    "derive_discrete_model", "enumerate_states", "fidelity_at_age", "newer_pair_distribution",
    "observables", "older_pair_distribution", "purification_success_prob", "purified_age",
    "purified_fidelity", "steady_state_full", "steady_state_reduced",
]
