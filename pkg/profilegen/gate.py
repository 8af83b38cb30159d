"""Risk-ratio gates used during profile construction.

Aggregation over the already-selected set is MAX over defined pair RRs.
Undefined pairs are skipped; a candidate whose every pair is undefined is
rejected.
"""
from typing import Optional, Sequence

from cohort import CohortStats
from core.models import ConceptCode, GateRecord, PairRR


def pair_risk_ratios(
    cohort: CohortStats,
    selected: Sequence[ConceptCode],
    candidate: ConceptCode,
    outcome: ConceptCode,
) -> list:
    return [PairRR(selected=s, rr=cohort.risk_ratio(s, candidate, outcome)) for s in selected]


def _aggregate(pairs: list) -> Optional[float]:
    defined = [p.rr for p in pairs if p.rr is not None]
    return max(defined) if defined else None


def band_gate(
    cohort: CohortStats,
    selected: Sequence[ConceptCode],
    candidate: ConceptCode,
    outcome: ConceptCode,
    low: float,
    high: float,
    strict: bool = False,
    stage: int = 3,
) -> GateRecord:
    """Admit when low < aggregate RR <= high.

    With strict=True every defined pair must lie inside the band.
    """
    pairs = pair_risk_ratios(cohort, selected, candidate, outcome)
    aggregate = _aggregate(pairs)
    if aggregate is None:
        passed = False
    elif strict:
        passed = all(low < p.rr <= high for p in pairs if p.rr is not None)
    else:
        passed = low < aggregate <= high
    return GateRecord(
        candidate=candidate,
        stage=stage,
        rule="strict" if strict else "band",
        pairs=pairs,
        aggregate=aggregate,
        passed=passed,
    )


def diversity_gate(
    cohort: CohortStats,
    selected: Sequence[ConceptCode],
    candidate: ConceptCode,
    outcome: ConceptCode,
    threshold: float,
    stage: int = 4,
) -> GateRecord:
    """Admit when the aggregate RR exceeds threshold."""
    pairs = pair_risk_ratios(cohort, selected, candidate, outcome)
    aggregate = _aggregate(pairs)
    return GateRecord(
        candidate=candidate,
        stage=stage,
        rule="diversity",
        pairs=pairs,
        aggregate=aggregate,
        passed=aggregate is not None and aggregate > threshold,
    )
