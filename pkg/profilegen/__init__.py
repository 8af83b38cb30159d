"""Two-phase medical profile generation."""
from .engine import GenerationContext, build_sections, generate_profile, generate_profiles
from .gate import band_gate, diversity_gate
from .models import GenConfig, GenerationFailure, GenerationResult, SelectionReport, SigmaBand, SigmaBandPlan
from .predictor import LogOddsPredictor, ResponsePredictor
from .sigma_bands import predicted_count, select_cohort, sigma_band_plan
from .storage import load_profiles, write_profiles

__all__ = [
    "GenConfig",
    "GenerationContext",
    "GenerationFailure",
    "GenerationResult",
    "LogOddsPredictor",
    "ResponsePredictor",
    "SelectionReport",
    "SigmaBand",
    "SigmaBandPlan",
    "band_gate",
    "build_sections",
    "diversity_gate",
    "generate_profile",
    "generate_profiles",
    "load_profiles",
    "predicted_count",
    "select_cohort",
    "sigma_band_plan",
    "write_profiles",
]
