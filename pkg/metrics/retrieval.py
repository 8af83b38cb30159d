"""Intake recall and retrieval-rank metrics for the decision aid."""
from statistics import fmean
from typing import Iterable, List, Optional, Sequence, Set, Tuple

from core.models import FEATURE_VOCABULARIES, ConceptCode
from plugins.ports.base import RetrievalTrace

from .models import RankBreakdown, RecallBreakdown


def _share(part: int, whole: int) -> Optional[float]:
    return part / whole if whole else None


def concept_recall(reference: Iterable[ConceptCode], extracted: Iterable[ConceptCode]) -> RecallBreakdown:
    """|reference & extracted| / |reference|, overall and per feature vocabulary."""
    ref: Set[ConceptCode] = set(reference)
    got: Set[ConceptCode] = set(extracted)
    hit = ref & got
    report = RecallBreakdown(
        reference_count=len(ref),
        retrieved=len(hit),
        missed=len(ref - got),
        recall=_share(len(hit), len(ref)),
        extra_concepts_outside_reference=len(got - ref),
    )
    for vocabulary in FEATURE_VOCABULARIES:
        ref_v = {c for c in ref if c.vocabulary == vocabulary}
        hit_v = {c for c in hit if c.vocabulary == vocabulary}
        report.reference_by_vocabulary[vocabulary.value] = len(ref_v)
        report.retrieved_by_vocabulary[vocabulary.value] = len(hit_v)
        report.by_vocabulary[vocabulary.value] = _share(len(hit_v), len(ref_v))
        report.extra_by_vocabulary[vocabulary.value] = sum(1 for c in got - ref if c.vocabulary == vocabulary)
    return report


def best_rank(code: ConceptCode, candidate_lists: Iterable[Sequence[ConceptCode]]) -> Optional[int]:
    """1-based best position of code over all lists; None if absent everywhere."""
    best: Optional[int] = None
    for candidates in candidate_lists:
        for position, candidate in enumerate(candidates, start=1):
            if candidate == code:
                if best is None or position < best:
                    best = position
                break
    return best


def rank_items(
    reference: Iterable[ConceptCode],
    traces: Sequence[RetrievalTrace],
) -> List[Tuple[ConceptCode, List[ConceptCode]]]:
    """Pair each reference concept with the trace list that ranks it best."""
    items = []
    for code in sorted(set(reference)):
        best_list: List[ConceptCode] = []
        best: Optional[int] = None
        for trace in traces:
            rank = best_rank(code, [trace.candidates])
            if rank is not None and (best is None or rank < best):
                best, best_list = rank, list(trace.candidates)
        items.append((code, best_list))
    return items


def retrieval_rank_metrics(
    items: Sequence[Tuple[ConceptCode, Sequence[ConceptCode]]],
    top_n: int = 20,
) -> RankBreakdown:
    """Rank statistics over (reference code, ranked candidates) items."""
    ranks = [best_rank(code, [candidates]) for code, candidates in items]
    n = len(ranks)
    rank1 = sum(1 for r in ranks if r == 1)
    beyond = [r for r in ranks if r is not None and r > 1]
    missing = sum(1 for r in ranks if r is None)
    within = sum(1 for r in beyond if r <= top_n)
    return RankBreakdown(
        n_items=n,
        rank1=rank1,
        beyond_rank1=len(beyond),
        within_top_n=within,
        not_retrieved=missing,
        top_n=top_n,
        rank1_accuracy=_share(rank1, n),
        beyond_rank1_share=_share(len(beyond), n),
        within_top_n_of_non_rank1=_share(within, len(beyond)),
        not_retrieved_share=_share(missing, n),
        mean_nontop1_rank=fmean(beyond) if beyond else None,
    )


def pool_rank_breakdowns(breakdowns: Iterable[RankBreakdown], top_n: int = 20) -> RankBreakdown:
    """Aggregate item counts across conversations (means weighted by items)."""
    total = RankBreakdown(top_n=top_n)
    rank_sum = 0.0
    for b in breakdowns:
        total.n_items += b.n_items
        total.rank1 += b.rank1
        total.beyond_rank1 += b.beyond_rank1
        total.within_top_n += b.within_top_n
        total.not_retrieved += b.not_retrieved
        if b.mean_nontop1_rank is not None:
            rank_sum += b.mean_nontop1_rank * b.beyond_rank1
    total.rank1_accuracy = _share(total.rank1, total.n_items)
    total.beyond_rank1_share = _share(total.beyond_rank1, total.n_items)
    total.within_top_n_of_non_rank1 = _share(total.within_top_n, total.beyond_rank1)
    total.not_retrieved_share = _share(total.not_retrieved, total.n_items)
    total.mean_nontop1_rank = rank_sum / total.beyond_rank1 if total.beyond_rank1 else None
    return total


def pool_recall(breakdowns: Iterable[RecallBreakdown]) -> Tuple[RecallBreakdown, int]:
    """Micro-pooled recall; conversations with an empty reference are excluded and counted."""
    total = RecallBreakdown()
    excluded = 0
    for b in breakdowns:
        if b.reference_count == 0:
            excluded += 1
            continue
        total.reference_count += b.reference_count
        total.retrieved += b.retrieved
        total.missed += b.missed
        total.extra_concepts_outside_reference += b.extra_concepts_outside_reference
        for vocab, count in b.reference_by_vocabulary.items():
            total.reference_by_vocabulary[vocab] = total.reference_by_vocabulary.get(vocab, 0) + count
        for vocab, count in b.retrieved_by_vocabulary.items():
            total.retrieved_by_vocabulary[vocab] = total.retrieved_by_vocabulary.get(vocab, 0) + count
        for vocab, count in b.extra_by_vocabulary.items():
            total.extra_by_vocabulary[vocab] = total.extra_by_vocabulary.get(vocab, 0) + count
    total.recall = _share(total.retrieved, total.reference_count)
    total.by_vocabulary = {
        vocab: _share(total.retrieved_by_vocabulary.get(vocab, 0), count)
        for vocab, count in total.reference_by_vocabulary.items()
    }
    return total, excluded
