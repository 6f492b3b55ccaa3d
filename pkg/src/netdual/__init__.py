"""Dual-based distributed convex optimization over simulated networks."""

from .certify import (
    ReferenceSolution,
    SolutionCertificate,
    certificate,
    compare_to_bound,
    config_from_reference,
    reference_solve,
)
from .dualnet import VARIANTS, AlgoConfig, RunTrace, augmented_modulus, iteration_bound, run
from .graph import Topology, build_graph, laplacian, spectral_summary
from .problems import SeparableObjective

__all__ = [
    "VARIANTS", "AlgoConfig", "ReferenceSolution", "RunTrace", "SeparableObjective",
    "SolutionCertificate", "Topology", "augmented_modulus", "build_graph", "certificate", "compare_to_bound",
    "config_from_reference", "iteration_bound", "laplacian", "reference_solve", "run",
    "spectral_summary",
]
