"""Report tables, export and verification."""
from .engine import (
    ReportEngine,
    diff_reports,
    load_reference_policy,
    load_report,
    policy_reference,
    report_records,
)
from .tables import MISSING, recommendation_table, weighted_scores

__all__ = [
    "MISSING",
    "ReportEngine",
    "diff_reports",
    "load_reference_policy",
    "load_report",
    "policy_reference",
    "recommendation_table",
    "report_records",
    "weighted_scores",
]
