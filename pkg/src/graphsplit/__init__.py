"""Graph-structured frugal splitting for monotone inclusions."""

from .errors import (
    DivergenceError,
    GraphsplitError,
    InvalidConfigError,
    InvalidInputError,
    UnsupportedSchemeError,
)
from .graphs import SubgraphWeights, WeightedGraph, build_topology, incidence, laplacian, subgraph
from .operators import ProblemInstance
from .presets import PRESET_NAMES, make_preset, reduction_suite
from .scheme import (
    CoefficientScheme,
    build_from_graphs,
    check_assumptions,
    check_explicit,
    compute_tau,
    parameter_ranges,
    standard_PQR,
)
from .solver import SolverConfig, forward_sweep, locality_audit, solve, step

__version__ = "0.1.0"

__all__ = [
    "CoefficientScheme", "DivergenceError", "GraphsplitError", "InvalidConfigError",
    "InvalidInputError", "PRESET_NAMES", "ProblemInstance", "SolverConfig", "SubgraphWeights",
    "UnsupportedSchemeError", "WeightedGraph", "build_from_graphs", "build_topology",
    "check_assumptions", "check_explicit", "compute_tau", "forward_sweep", "incidence",
    "laplacian", "locality_audit", "make_preset", "parameter_ranges", "reduction_suite", "solve",
    "standard_PQR", "step", "subgraph", "__version__",
]
