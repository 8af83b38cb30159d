"""Cohort statistics: conditional response rates, risk ratios, predictor ranking.

Membership is stored as one boolean numpy array per concept over patients
sorted by id, so every count is a vectorized AND + sum.

Risk ratios use raw conditional probabilities with a joint-cell floor:
RR(s, v | e0) = P(resp | s and v, e0) / P(resp | s, e0), undefined (None)
when fewer than min_support patients hold s and v with e0 recorded, when no
patient holds s with e0 recorded, or when nobody with s responded.
Add-one smoothing is used only for outcome-predictor ranking and the
response predictor, never inside the gate.
"""
import logging
import math
import threading
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from config import Defaults
from core.errors import DemographicError
from core.models import FEATURE_VOCABULARIES, ConceptCode, DemographicKind
from ontology import Ontology

from .models import CategoricalDistribution, PatientRecord

logger = logging.getLogger("patsim.cohort")


class CohortStats:
    """Immutable per-outcome statistics over a patient cohort.

    Thread-safe: the pair-RR memo is filled outside the lock and inserted
    under it; racing writers store identical values.
    """

    def __init__(
        self,
        records: Iterable[PatientRecord],
        ontology: Ontology,
        min_support: int = Defaults.MIN_SUPPORT,
    ):
        self.ontology = ontology
        self.min_support = min_support
        self.records: List[PatientRecord] = sorted(records, key=lambda r: r.patient_id)
        n = len(self.records)
        self.n_patients = n

        members: Dict[ConceptCode, List[int]] = {}
        treated: Dict[ConceptCode, List[int]] = {}
        responded: Dict[ConceptCode, List[int]] = {}
        for i, record in enumerate(self.records):
            for code in record.concepts:
                members.setdefault(code, []).append(i)
            for flag in record.outcomes:
                treated.setdefault(flag.code, []).append(i)
                if flag.responded:
                    responded.setdefault(flag.code, []).append(i)

        self._has = {code: self._mask(idx) for code, idx in members.items()}
        self._treated = {code: self._mask(idx) for code, idx in treated.items()}
        self._responded = {code: self._mask(responded.get(code, [])) for code in treated}
        self._empty = np.zeros(n, dtype=bool)

        self._lock = threading.Lock()
        self._rr_memo: Dict[Tuple[ConceptCode, ConceptCode, ConceptCode], Optional[float]] = {}
        self._score_memo: Dict[ConceptCode, Dict[ConceptCode, float]] = {}
        logger.debug(f"[Cohort] {n} patients, {len(self._has)} concepts, {len(self._treated)} outcomes")

    def _mask(self, indices: List[int]) -> np.ndarray:
        mask = np.zeros(self.n_patients, dtype=bool)
        mask[indices] = True
        return mask

    # ----------------------------------------------------------------- counts

    def has(self, code: ConceptCode) -> np.ndarray:
        return self._has.get(code, self._empty)

    def support(self, code: ConceptCode) -> int:
        return int(self.has(code).sum())

    def concepts(self) -> List[ConceptCode]:
        return sorted(self._has)

    def outcomes(self) -> List[ConceptCode]:
        return sorted(self._treated)

    def treated(self, outcome: ConceptCode) -> np.ndarray:
        return self._treated.get(outcome, self._empty)

    def responded(self, outcome: ConceptCode) -> np.ndarray:
        return self._responded.get(outcome, self._empty)

    def treated_count(self, outcome: ConceptCode) -> int:
        return int(self.treated(outcome).sum())

    def most_treated_outcome(self) -> ConceptCode:
        """Outcome recorded for the most patients; ties by code."""
        if not self._treated:
            raise ValueError("cohort has no outcome records")
        return min(self._treated, key=lambda e: (-self.treated_count(e), e))

    def base_rate(self, outcome: ConceptCode) -> Optional[float]:
        """Raw response rate among patients treated with the outcome."""
        n = self.treated_count(outcome)
        if n == 0:
            return None
        return float(self.responded(outcome).sum()) / n

    def smoothed_base_rate(self, outcome: ConceptCode) -> float:
        n = self.treated_count(outcome)
        r = int(self.responded(outcome).sum())
        return (r + 1) / (n + 2)

    # ------------------------------------------------------------ risk ratios

    def risk_ratio(self, s: ConceptCode, v: ConceptCode, outcome: ConceptCode) -> Optional[float]:
        """Raw pair risk ratio RR(s, v | outcome); None when undefined."""
        key = (s, v, outcome)
        cached = self._rr_memo.get(key, _MISSING)
        if cached is not _MISSING:
            return cached

        value = self._compute_risk_ratio(s, v, outcome)
        with self._lock:
            self._rr_memo.setdefault(key, value)
        return value

    def _compute_risk_ratio(self, s: ConceptCode, v: ConceptCode, outcome: ConceptCode) -> Optional[float]:
        treated = self.treated(outcome)
        responded = self.responded(outcome)
        with_s = self.has(s) & treated
        with_sv = with_s & self.has(v)

        n_s = int(with_s.sum())
        n_sv = int(with_sv.sum())
        if n_s == 0 or n_sv < self.min_support:
            return None
        p_s = float((with_s & responded).sum()) / n_s
        if p_s == 0:
            return None
        p_sv = float((with_sv & responded).sum()) / n_sv
        return p_sv / p_s

    def outcome_counts(self, feature: ConceptCode, outcome: ConceptCode) -> Tuple[int, int, int, int]:
        """(responders with f, treated with f, responders without f, treated without f)."""
        treated = self.treated(outcome)
        responded = self.responded(outcome)
        has_f = self.has(feature)
        with_f = treated & has_f
        without_f = treated & ~has_f
        return (
            int((with_f & responded).sum()),
            int(with_f.sum()),
            int((without_f & responded).sum()),
            int(without_f.sum()),
        )

    def smoothed_log_rr(self, feature: ConceptCode, outcome: ConceptCode) -> float:
        """ln of the add-one smoothed outcome risk ratio of a feature."""
        a, n1, b, n0 = self.outcome_counts(feature, outcome)
        return math.log(((a + 1) / (n1 + 2)) / ((b + 1) / (n0 + 2)))

    def predictor_scores(self, outcome: ConceptCode) -> Dict[ConceptCode, float]:
        """|smoothed ln RR| for every feature concept with enough treated support."""
        cached = self._score_memo.get(outcome)
        if cached is not None:
            return cached
        treated = self.treated(outcome)
        scores = {}
        for code in self.concepts():
            if code.vocabulary not in FEATURE_VOCABULARIES:
                continue
            if int((self.has(code) & treated).sum()) < self.min_support:
                continue
            scores[code] = abs(self.smoothed_log_rr(code, outcome))
        with self._lock:
            self._score_memo.setdefault(outcome, scores)
        return scores


_MISSING = object()


def risk_ratio(cohort: CohortStats, s: ConceptCode, v: ConceptCode, outcome: ConceptCode) -> Optional[float]:
    """Pair risk ratio of v given s for responders to outcome; None when undefined."""
    return cohort.risk_ratio(s, v, outcome)


def rank_top_k_predictors(cohort: CohortStats, outcome: ConceptCode, k: int) -> List[ConceptCode]:
    """Top-k feature concepts by |ln RR| of outcome response, ties by code.

    Demographic and outcome concepts are never candidates; features with
    fewer than min_support treated holders are skipped.
    """
    scores = cohort.predictor_scores(outcome)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [code for code, _ in ranked[:k]]


def demographic_distribution(
    records: Iterable[PatientRecord],
    kind: DemographicKind,
    ontology: Ontology,
) -> CategoricalDistribution:
    """Empirical distribution of one demographic kind.

    Raises:
        DemographicError: a patient without exactly one concept of that kind
    """
    counts: Dict[ConceptCode, int] = {}
    for record in records:
        found = [c for c in record.concepts if ontology.demographic_kind(c) == kind]
        if len(found) != 1:
            raise DemographicError(
                f"patient {record.patient_id} has {len(found)} {kind.value} concepts, expected 1",
                patient_id=record.patient_id,
            )
        counts[found[0]] = counts.get(found[0], 0) + 1
    if not counts:
        raise DemographicError(f"no patients to estimate {kind.value} distribution")
    categories = sorted(counts)
    return CategoricalDistribution(kind=kind, categories=categories, counts=[counts[c] for c in categories])
