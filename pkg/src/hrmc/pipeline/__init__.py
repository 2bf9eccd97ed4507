"""The union-of-subspaces completion pipeline."""

from .assign import (
    AMBIGUOUS,
    COMPLETED,
    DEGENERATE,
    INSUFFICIENT,
    CompletionReport,
    assign_column,
)
from .neighborhoods import Neighborhood, form_neighborhood, select_seeds, thin_neighborhood
from .params import ParamWarning, PipelineParams, derive_params, practical_overrides, practical_seed_count
from .run import PipelineConfig, PipelineResult, complete_matrix
from .subspaces import Candidate, CandidateSet, complete_neighborhoods, refine_subspaces
