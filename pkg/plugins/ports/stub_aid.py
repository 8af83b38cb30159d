"""Scripted six-stage decision aid used as the offline system under test.

One composite question per intake stage (wording is toolkit-authored).
Patient replies are split into phrases; each phrase is normalized by exact
lexicon matches and, for the ranked retrieval trace, by dense
nearest-neighbour search over concept display names. The recommendation is
the antidepressant whose cohort-derived feature set overlaps most with the
extracted concepts.
"""
import logging
import math
import re
from typing import Dict, Iterable, List, Set

from pydantic import BaseModel, Field

from cohort import CohortStats
from config import Defaults
from core.models import FEATURE_VOCABULARIES, ConceptCode
from ontology import Lexicon, Ontology, match_medical_terms, similarity_index, tokenize

from .base import (
    NO_RECOMMENDATION,
    AidQuestion,
    ChatMessage,
    IntakeRecord,
    IntakeStage,
    Recommendation,
    RetrievalTrace,
    STAGE_ORDER,
    SutPort,
)
from .registry import PortRegistry

logger = logging.getLogger("patsim.ports")

STAGE_WORDING = "toolkit-authored"

STAGE_QUESTIONS: Dict[IntakeStage, str] = {
    IntakeStage.RAPPORT: "Hello, I'm here to help find a treatment that suits you. To start, could you tell me your age and gender?",
    IntakeStage.ILLNESS_HISTORY: "What medical conditions or diagnoses have you been told you have?",
    IntakeStage.ANTIDEPRESSANT_HISTORY: "Which antidepressant medications have you taken before?",
    IntakeStage.CURRENT_MEDICATIONS: "What other medications are you currently taking?",
    IntakeStage.PROCEDURES: "Have you had any procedures, tests or therapy sessions?",
    IntakeStage.RECOMMENDATION: "Thank you for sharing all of that. Here is my recommendation.",
}

_PHRASE_SPLIT = re.compile(r"[.,;:!?()]+|\s+and\s+|\s+but\s+", re.IGNORECASE)


class DrugFeatureTable(BaseModel):
    """Antidepressant outcome -> features associated with response to it."""
    features: Dict[str, List[ConceptCode]] = Field(default_factory=dict)

    @classmethod
    def from_cohort(
        cls,
        cohort: CohortStats,
        min_rr: float = Defaults.RECOMMEND_MIN_RR,
        per_drug: int = Defaults.RECOMMEND_FEATURES_PER_DRUG,
    ) -> "DrugFeatureTable":
        """Keep, per outcome, the strongest features with smoothed RR >= min_rr."""
        threshold = math.log(min_rr)
        table: Dict[str, List[ConceptCode]] = {}
        for outcome in cohort.outcomes():
            eligible = cohort.predictor_scores(outcome)
            scored = [
                (cohort.smoothed_log_rr(code, outcome), code)
                for code in eligible
            ]
            kept = [(s, c) for s, c in scored if s >= threshold]
            kept.sort(key=lambda item: (-item[0], item[1]))
            table[outcome.qualified] = [c for _, c in kept[:per_drug]]
        return cls(features=table)

    def recommend(self, concepts: Iterable[ConceptCode]) -> str:
        """Outcome with maximum overlap (ties by code); NO_RECOMMENDATION at zero."""
        present = set(concepts)
        best, best_overlap = NO_RECOMMENDATION, 0
        for outcome in sorted(self.features):
            overlap = len(present.intersection(self.features[outcome]))
            if overlap > best_overlap:
                best, best_overlap = outcome, overlap
        return best


def split_phrases(text: str) -> List[str]:
    return [p.strip() for p in _PHRASE_SPLIT.split(text) if p and tokenize(p)]


class StubDecisionAid(SutPort):
    """Deterministic six-stage intake with lexicon + dense retrieval.

    Example:
        aid = StubDecisionAid(ontology, lexicon, embedder, table)
        question = aid.next_question(history)
    """

    name = "stub"
    description = "Scripted six-stage decision aid (offline)"

    def __init__(
        self,
        ontology: Ontology,
        lexicon: Lexicon,
        embedder,
        table: DrugFeatureTable,
        depth: int = Defaults.RETRIEVAL_DEPTH,
        accept_score: float = 0.75,
    ):
        self.ontology = ontology
        self.lexicon = lexicon
        self.embedder = embedder
        self.table = table
        self.depth = depth
        self.accept_score = accept_score

    def next_question(self, history: List[ChatMessage]) -> AidQuestion:
        asked = sum(1 for m in history if m.role == "aid")
        stage = STAGE_ORDER[min(asked, len(STAGE_ORDER) - 1)]
        return AidQuestion(stage=stage, utterance=STAGE_QUESTIONS[stage])

    def intake(self, history: List[ChatMessage]) -> IntakeRecord:
        index = similarity_index(self.ontology, self.embedder)
        extracted: Set[ConceptCode] = set()
        traces: List[RetrievalTrace] = []
        patient_turn = 0
        for message in history:
            if message.role != "patient":
                continue
            patient_turn += 1
            for phrase in split_phrases(message.content):
                extracted.update(m.code for m in match_medical_terms(phrase, self.lexicon))
                vector = self.embedder.embed([phrase])[0]
                ranked = index.query(vector, self.depth, FEATURE_VOCABULARIES)
                if not ranked:
                    continue
                traces.append(RetrievalTrace(
                    turn=patient_turn,
                    phrase=phrase,
                    candidates=[c for c, _ in ranked],
                    scores=[round(s, 6) for _, s in ranked],
                ))
                top_code, top_score = ranked[0]
                if top_score >= self.accept_score:
                    extracted.add(top_code)
        return IntakeRecord(extracted=sorted(extracted), traces=traces)

    def recommend(self, history: List[ChatMessage]) -> Recommendation:
        record = self.intake(history)
        choice = self.table.recommend(record.extracted)
        if choice == NO_RECOMMENDATION:
            utterance = "I don't have enough information to recommend a specific antidepressant yet."
        else:
            name = self.ontology.display_name(ConceptCode.parse(choice)).replace(" response", "")
            utterance = f"Based on what you've told me, {name} may be a good option to discuss with your doctor."
        logger.debug(f"[Aid] recommendation {choice} from {len(record.extracted)} extracted concepts")
        return Recommendation(recommendation=choice, utterance=utterance)


PortRegistry.register(StubDecisionAid)
