"""High-rank matrix completion for columns drawn from a union of subspaces."""

from .core import (
    ObservedMatrix,
    ObservedVector,
    PartialDistance,
    Subspace,
    coherence_subspace,
    coherence_vector,
    complete_column,
    partial_distance,
    principal_angles,
    restricted_projection_residual,
    subspace_contained_in,
)
from .lowrank import CompletionResult, SolverConfig, complete_lowrank, completion_failed

__version__ = "0.1.0"
