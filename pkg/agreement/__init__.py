"""Annotation schema, agreement statistics, adjudication and judge annotation."""
from .adjudication import adjudicate
from .bootstrap import paired_bootstrap_kappa
from .engine import agreement_report, compute_agreement, label_distribution, load_agreement, paired_labels, write_agreement
from .io import ANNOTATION_COLUMNS, read_annotations, write_annotations, write_resolution_template
from .judge import (
    DEFAULT_TEMPLATE,
    annotate_conversation,
    answer_key_annotations,
    judge_annotate,
    load_template,
    parse_judge_reply,
    render_judge_prompt,
    simulate_annotator,
)
from .models import (
    AdjudicationResult,
    AgreementBundle,
    AgreementReport,
    AnnotationItem,
    AnnotationLabel,
    AnnotationSet,
    AnnotationStatus,
    BootstrapResult,
    Disagreement,
    JudgeFailure,
    LabelDistribution,
)
from .stats import accuracy, align, cohens_kappa, confusion_matrix, kappa_from_counts, label_counts, micro_f1

__all__ = [
    "ANNOTATION_COLUMNS",
    "DEFAULT_TEMPLATE",
    "AdjudicationResult",
    "AgreementBundle",
    "AgreementReport",
    "AnnotationItem",
    "AnnotationLabel",
    "AnnotationSet",
    "AnnotationStatus",
    "BootstrapResult",
    "Disagreement",
    "JudgeFailure",
    "LabelDistribution",
    "accuracy",
    "adjudicate",
    "agreement_report",
    "align",
    "annotate_conversation",
    "answer_key_annotations",
    "cohens_kappa",
    "compute_agreement",
    "confusion_matrix",
    "judge_annotate",
    "kappa_from_counts",
    "label_counts",
    "label_distribution",
    "load_agreement",
    "load_template",
    "micro_f1",
    "paired_bootstrap_kappa",
    "paired_labels",
    "parse_judge_reply",
    "read_annotations",
    "render_judge_prompt",
    "simulate_annotator",
    "write_agreement",
    "write_annotations",
    "write_resolution_template",
]
