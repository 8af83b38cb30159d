"""Semantic error injection with ancestor/descendant and distance filtering."""
from .engine import (
    passes_filter,
    perturb_profile,
    perturb_profiles,
    perturbation_count,
    select_perturbation,
    select_profiles,
    shuffle_order,
)
from .ground_truth import answer_key, load_ground_truth, write_ground_truth
from .models import (
    PerturbationFailure,
    PerturbationPlan,
    PerturbationRecord,
    PerturbationResult,
    RelaxationStep,
)

__all__ = [
    "PerturbationFailure",
    "PerturbationPlan",
    "PerturbationRecord",
    "PerturbationResult",
    "RelaxationStep",
    "answer_key",
    "load_ground_truth",
    "passes_filter",
    "perturb_profile",
    "perturb_profiles",
    "perturbation_count",
    "select_perturbation",
    "select_profiles",
    "shuffle_order",
    "write_ground_truth",
]
