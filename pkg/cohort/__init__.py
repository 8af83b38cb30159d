"""Patient cohort: ingestion, statistics and synthetic fixtures."""
from .ingest import load_cohort, parse_record, write_cohort
from .models import CategoricalDistribution, OutcomeFlag, PatientRecord
from .stats import CohortStats, demographic_distribution, rank_top_k_predictors, risk_ratio
from .synthetic import SyntheticWorldGenerator, build_synthetic_world

__all__ = [
    "CategoricalDistribution",
    "CohortStats",
    "OutcomeFlag",
    "PatientRecord",
    "SyntheticWorldGenerator",
    "build_synthetic_world",
    "demographic_distribution",
    "load_cohort",
    "parse_record",
    "rank_top_k_predictors",
    "risk_ratio",
    "write_cohort",
]
