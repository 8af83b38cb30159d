"""Metric report models."""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class TurnScore(BaseModel):
    """Mean classifier probability; value withheld when any turn failed."""
    value: Optional[float] = None
    scored: int = 0
    failed: int = 0

    @property
    def complete(self) -> bool:
        return self.failed == 0 and self.value is not None


class PairSimilarity(BaseModel):
    value: Optional[float] = None
    pairs: int = 0
    skipped: int = 0


class RecallBreakdown(BaseModel):
    """Recall of the reference concept set, overall and per vocabulary."""
    reference_count: int = 0
    retrieved: int = 0
    missed: int = 0
    recall: Optional[float] = None
    by_vocabulary: Dict[str, Optional[float]] = Field(default_factory=dict)
    reference_by_vocabulary: Dict[str, int] = Field(default_factory=dict)
    retrieved_by_vocabulary: Dict[str, int] = Field(default_factory=dict)
    extra_concepts_outside_reference: int = 0
    extra_by_vocabulary: Dict[str, int] = Field(default_factory=dict)


class RankBreakdown(BaseModel):
    """Where reference concepts landed in the ranked retrieval candidates.

    rank1_accuracy + beyond_rank1 + not_retrieved = 1 over n_items;
    within_top_n_of_non_rank1 is a share of the beyond-rank-1 items.
    """
    n_items: int = 0
    rank1: int = 0
    beyond_rank1: int = 0
    within_top_n: int = 0
    not_retrieved: int = 0
    top_n: int = 20
    rank1_accuracy: Optional[float] = None
    beyond_rank1_share: Optional[float] = None
    within_top_n_of_non_rank1: Optional[float] = None
    not_retrieved_share: Optional[float] = None
    mean_nontop1_rank: Optional[float] = None


class RetrievalReport(BaseModel):
    recall: RecallBreakdown = Field(default_factory=RecallBreakdown)
    ranks: RankBreakdown = Field(default_factory=RankBreakdown)


class ConversationMetrics(BaseModel):
    """Every metric of one conversation, keyed by id and cell."""
    conversation_id: str
    profile_id: str
    linguistic: str
    behavioral: str
    status: str
    n_turns: int = 0
    parse_failed_turns: int = 0
    fkgl: Optional[float] = None
    avg_response_length: Optional[float] = None
    medical_term_count: Optional[float] = None
    depression_score: Optional[float] = None
    depression_complete: bool = True
    toxicity: Optional[float] = None
    toxicity_complete: bool = True
    on_topic_similarity: Optional[float] = None
    on_topic_skipped: int = 0
    retrieval: RetrievalReport = Field(default_factory=RetrievalReport)
    recommendation: Optional[str] = None

    @property
    def cell(self) -> str:
        return f"{self.linguistic}/{self.behavioral}"

    def flat(self) -> Dict[str, object]:
        """Single-level row for delimited export."""
        row = self.model_dump(exclude={"retrieval"})
        recall = self.retrieval.recall
        ranks = self.retrieval.ranks
        row.update({
            "reference_count": recall.reference_count,
            "retrieved": recall.retrieved,
            "missed": recall.missed,
            "recall": recall.recall,
            "extra_concepts": recall.extra_concepts_outside_reference,
            "rank_items": ranks.n_items,
            "rank1": ranks.rank1,
            "beyond_rank1": ranks.beyond_rank1,
            "within_top_n": ranks.within_top_n,
            "not_retrieved": ranks.not_retrieved,
            "mean_nontop1_rank": ranks.mean_nontop1_rank,
        })
        for vocabulary, value in recall.by_vocabulary.items():
            row[f"recall_{vocabulary}"] = value
        return row


class CellMetrics(BaseModel):
    """Per-cell means with the number of conversations contributing."""
    linguistic: str
    behavioral: str
    conversations: int = 0
    fkgl: Optional[float] = None
    avg_response_length: Optional[float] = None
    medical_term_count: Optional[float] = None
    depression_score: Optional[float] = None
    toxicity: Optional[float] = None
    on_topic_similarity: Optional[float] = None
    counts: Dict[str, int] = Field(default_factory=dict)


class MetricReport(BaseModel):
    conversations: List[ConversationMetrics] = Field(default_factory=list)
    cells: List[CellMetrics] = Field(default_factory=list)
