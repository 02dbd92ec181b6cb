"""Monte Carlo simulation of the link under PBG and the replace-oldest baseline.

The slot loop runs in a Cython extension when it is built and in pure
Python otherwise; ``BACKEND`` reports which one is active.  Set
``PBGFID_PURE_PYTHON=1`` to force the fallback.
"""
from .core import (
    BACKEND,
    PolicyKind,
    SimConfig,
    SimStats,
    available_backends,
    empirical_distribution,
    empirical_newer_distribution,
    empirical_observables,
    simulate,
    step,
    transition_counts,
)

__all__ = [
    "BACKEND",
    "PolicyKind",
    "SimConfig",
    "SimStats",
    "available_backends",
    "empirical_distribution",
    "empirical_newer_distribution",
    "empirical_observables",
    "simulate",
    "step",
    "transition_counts",
]
