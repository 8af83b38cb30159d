"""Shared domain models: concept codes and medical profiles."""
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Optional, Set

from pydantic import BaseModel, Field, model_validator


class Vocabulary(str, Enum):
    """Concept vocabularies carried by the ontology."""
    DIAGNOSIS = "diagnosis"
    MEDICATION = "medication"
    PROCEDURE = "procedure"
    DEMOGRAPHIC = "demographic"
    OUTCOME = "outcome"


# Vocabularies a profile fact can be drawn from besides demographics
FEATURE_VOCABULARIES = (Vocabulary.DIAGNOSIS, Vocabulary.MEDICATION, Vocabulary.PROCEDURE)


class DemographicKind(str, Enum):
    GENDER = "gender"
    AGE_BIN = "age_bin"


@dataclass(frozen=True, order=True)
class ConceptCode:
    """Identifier of one ontology concept, unique per (id, vocabulary)."""
    id: str
    vocabulary: Vocabulary

    @property
    def qualified(self) -> str:
        return f"{self.vocabulary.value}:{self.id}"

    @classmethod
    def parse(cls, qualified: str) -> "ConceptCode":
        """Parse the "vocabulary:id" form produced by `qualified`."""
        vocab, sep, cid = qualified.partition(":")
        if not sep or not cid:
            raise ValueError(f"not a qualified concept code: {qualified!r}")
        return cls(id=cid, vocabulary=Vocabulary(vocab))

    def __str__(self) -> str:
        return self.qualified


class SectionName(str, Enum):
    DEMOGRAPHICS = "demographics"
    DIAGNOSES = "diagnoses"
    MEDICATIONS = "medications"
    PROCEDURES = "procedures"


SECTION_ORDER = (
    SectionName.DEMOGRAPHICS,
    SectionName.DIAGNOSES,
    SectionName.MEDICATIONS,
    SectionName.PROCEDURES,
)

SECTION_TITLES = {
    SectionName.DEMOGRAPHICS: "Demographics",
    SectionName.DIAGNOSES: "Diagnosis History",
    SectionName.MEDICATIONS: "Medications",
    SectionName.PROCEDURES: "Procedures",
}

VOCABULARY_SECTIONS = {
    Vocabulary.DEMOGRAPHIC: SectionName.DEMOGRAPHICS,
    Vocabulary.DIAGNOSIS: SectionName.DIAGNOSES,
    Vocabulary.MEDICATION: SectionName.MEDICATIONS,
    Vocabulary.PROCEDURE: SectionName.PROCEDURES,
}

INDEX_PATTERN = re.compile(r"^(\d+)\.(\d+)$")


def format_index(section_number: int, item_number: int) -> str:
    return f"{section_number}.{item_number}"


def parse_index(index: str) -> tuple:
    """Split "X.Y" into (X, Y); raises ValueError on anything else."""
    match = INDEX_PATTERN.match(index)
    if not match:
        raise ValueError(f"malformed fact index: {index!r}")
    return int(match.group(1)), int(match.group(2))


class PairRR(BaseModel):
    """Risk ratio of the candidate against one already-selected concept."""
    selected: ConceptCode
    rr: Optional[float] = None


class GateRecord(BaseModel):
    """Provenance of one admission test (passed or rejected)."""
    candidate: ConceptCode
    stage: int
    rule: str  # "band", "strict" or "diversity"
    pairs: List[PairRR] = Field(default_factory=list)
    aggregate: Optional[float] = None
    passed: bool = False


class MedicalFact(BaseModel):
    """One indexed fact of a medical profile."""
    index: str
    code: ConceptCode
    text: str
    stage: int
    demographic: Optional[DemographicKind] = None
    gate: Optional[GateRecord] = None

    @property
    def section_number(self) -> int:
        return parse_index(self.index)[0]

    def tagged(self) -> str:
        """Render as a relevant-history entry, e.g. "[1.2] Gender: Male"."""
        return f"[{self.index}] {self.text}"


class ProfileSection(BaseModel):
    name: SectionName
    number: int
    facts: List[MedicalFact] = Field(default_factory=list)


class MedicalProfile(BaseModel):
    """A generated (or perturbed) medical profile.

    Invariants checked on construction: sections numbered densely from 1,
    fact indices "X.Y" dense within each section and unique, each concept at
    most once, exactly one gender and one age-bin fact.
    """
    profile_id: str
    outcome: ConceptCode
    seed: int
    predicted_response: Optional[float] = None
    sections: List[ProfileSection] = Field(default_factory=list)
    rejections: List[GateRecord] = Field(default_factory=list)
    perturbed: bool = False

    @model_validator(mode="after")
    def _check_invariants(self) -> "MedicalProfile":
        seen_idx: Set[str] = set()
        seen_codes: Set[ConceptCode] = set()
        kinds: List[DemographicKind] = []
        for expected_number, section in enumerate(self.sections, start=1):
            if section.number != expected_number:
                raise ValueError(
                    f"section {section.name.value} numbered {section.number}, expected {expected_number}"
                )
            for expected_item, fact in enumerate(section.facts, start=1):
                if fact.index in seen_idx:
                    raise ValueError(f"duplicate fact index {fact.index}")
                seen_idx.add(fact.index)
                if parse_index(fact.index) != (section.number, expected_item):
                    raise ValueError(
                        f"fact index {fact.index} out of order in section {section.number}"
                    )
                if fact.code in seen_codes:
                    raise ValueError(f"concept {fact.code} appears twice")
                seen_codes.add(fact.code)
                if fact.demographic is not None:
                    kinds.append(fact.demographic)
        for kind in DemographicKind:
            if kinds.count(kind) != 1:
                raise ValueError(f"profile needs exactly one {kind.value} fact, found {kinds.count(kind)}")
        return self

    def facts(self) -> Iterator[MedicalFact]:
        for section in self.sections:
            yield from section.facts

    def fact_map(self) -> Dict[str, MedicalFact]:
        return {fact.index: fact for fact in self.facts()}

    def concept_set(self) -> Set[ConceptCode]:
        return {fact.code for fact in self.facts()}

    def feature_concepts(self) -> Set[ConceptCode]:
        """Concepts outside the demographic vocabulary."""
        return {c for c in self.concept_set() if c.vocabulary in FEATURE_VOCABULARIES}

    def section(self, name: SectionName) -> Optional[ProfileSection]:
        for section in self.sections:
            if section.name == name:
                return section
        return None

    def model_dump(self, **kwargs) -> dict:
        """Override to exclude None values by default."""
        kwargs.setdefault('exclude_none', True)
        return super().model_dump(**kwargs)
