"""Linguistic, behavioral and retrieval metrics over conversation logs."""
from .engine import (
    MetricPorts,
    aggregate_cells,
    evaluate_conversation,
    evaluate_conversations,
    export_embeddings,
    expressed_concepts,
    load_metric_report,
    reference_concepts,
    retrieval_report,
    write_metric_report,
)
from .linguistic import medical_term_count, on_topic_similarity, response_length, turn_mean_score
from .models import (
    CellMetrics,
    ConversationMetrics,
    MetricReport,
    PairSimilarity,
    RankBreakdown,
    RecallBreakdown,
    RetrievalReport,
    TurnScore,
)
from .readability import count_syllables, fkgl, fkgl_text, split_sentences
from .retrieval import concept_recall, pool_rank_breakdowns, pool_recall, rank_items, retrieval_rank_metrics

__all__ = [
    "CellMetrics",
    "ConversationMetrics",
    "MetricPorts",
    "MetricReport",
    "PairSimilarity",
    "RankBreakdown",
    "RecallBreakdown",
    "RetrievalReport",
    "TurnScore",
    "aggregate_cells",
    "concept_recall",
    "count_syllables",
    "evaluate_conversation",
    "evaluate_conversations",
    "export_embeddings",
    "expressed_concepts",
    "fkgl",
    "fkgl_text",
    "load_metric_report",
    "medical_term_count",
    "on_topic_similarity",
    "pool_rank_breakdowns",
    "pool_recall",
    "rank_items",
    "reference_concepts",
    "response_length",
    "retrieval_rank_metrics",
    "split_sentences",
    "turn_mean_score",
    "write_metric_report",
]
