"""Annotation and agreement models."""
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from pydantic import BaseModel, Field, model_validator

SCHEMA_VERSION = 1

FREE_PREFIX = "free:"
PROFILE_PREFIX = "profile:"
PROFILE_KEYS = ("profile:linguistic", "profile:behavioral")
CONSENSUS = "consensus"

ItemKey = Tuple[str, int, str]


class AnnotationLabel(str, Enum):
    ACCURATE = "ACCURATE"
    INACCURATE = "INACCURATE"
    UNSUPPORTED = "UNSUPPORTED"


LABEL_ORDER = [label.value for label in AnnotationLabel]


class AnnotationStatus(str, Enum):
    LABELED = "labeled"
    ABSTAIN = "abstain"


def is_free_mention(key: str) -> bool:
    return key.startswith(FREE_PREFIX)


def is_profile_key(key: str) -> bool:
    return key.startswith(PROFILE_PREFIX)


class AnnotationItem(BaseModel):
    """One judgment: an item key, who labeled it and how.

    Medical items are keyed by fact index ("2.1") or a free-mention key
    ("free:<slug>"); profile classification items by "profile:<dimension>",
    whose label is a profile name instead of a three-way label.
    """
    conversation: str
    turn: int = 0
    key: str
    annotator: str
    label: Optional[str] = None
    status: AnnotationStatus = AnnotationStatus.LABELED

    @model_validator(mode="after")
    def _check_label(self) -> "AnnotationItem":
        if self.status == AnnotationStatus.ABSTAIN:
            self.label = None
            return self
        if not self.label:
            raise ValueError(f"labeled item {self.item_key} has no label")
        if not is_profile_key(self.key) and self.label not in LABEL_ORDER:
            raise ValueError(f"unknown label {self.label!r} for item {self.item_key}")
        return self

    @property
    def item_key(self) -> ItemKey:
        return (self.conversation, self.turn, self.key)

    @property
    def labeled(self) -> bool:
        return self.status == AnnotationStatus.LABELED


class AnnotationSet(BaseModel):
    """Judgments of one or more annotators; one item per (key, annotator)."""
    items: List[AnnotationItem] = Field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    @model_validator(mode="after")
    def _check_unique(self) -> "AnnotationSet":
        seen: Set[Tuple[ItemKey, str]] = set()
        for item in self.items:
            pair = (item.item_key, item.annotator)
            if pair in seen:
                raise ValueError(f"duplicate judgment {item.item_key} by {item.annotator}")
            seen.add(pair)
        return self

    @property
    def annotators(self) -> List[str]:
        return sorted({item.annotator for item in self.items})

    def for_annotator(self, annotator: str) -> "AnnotationSet":
        return AnnotationSet(items=[i for i in self.items if i.annotator == annotator])

    def medical(self) -> "AnnotationSet":
        return AnnotationSet(items=[i for i in self.items if not is_profile_key(i.key)])

    def profile_items(self, key: str) -> "AnnotationSet":
        return AnnotationSet(items=[i for i in self.items if i.key == key])

    def labels(self) -> Dict[ItemKey, str]:
        """Labeled items only; free mentions included."""
        return {i.item_key: i.label for i in self.items if i.labeled}

    def abstained(self) -> List[ItemKey]:
        return [i.item_key for i in self.items if not i.labeled]

    def free_mentions(self) -> List[AnnotationItem]:
        return [i for i in self.items if is_free_mention(i.key)]

    def conversations(self) -> Set[str]:
        return {i.conversation for i in self.items}

    def merged(self, other: "AnnotationSet") -> "AnnotationSet":
        return AnnotationSet(items=[*self.items, *other.items])


class Disagreement(BaseModel):
    conversation: str
    turn: int
    key: str
    label_a: Optional[str] = None
    label_b: Optional[str] = None


class AdjudicationResult(BaseModel):
    consensus: AnnotationSet = Field(default_factory=AnnotationSet)
    disagreements: List[Disagreement] = Field(default_factory=list)
    resolved: int = 0

    @property
    def complete(self) -> bool:
        return not self.disagreements


class BootstrapResult(BaseModel):
    """Paired bootstrap of kappa(a, b) - kappa(a, c)."""
    delta: float
    kappa_ab: float
    kappa_ac: float
    p_value: float
    resamples: int
    seed: int
    redraws: int = 0
    unit: str = "item"


class AgreementReport(BaseModel):
    """Agreement between two aligned label sources.

    confusion[i][j] counts items labeled labels[i] by annotator_a and
    labels[j] by annotator_b; row sums are annotator_a's label counts.
    """
    annotator_a: str
    annotator_b: str
    scope: str = "medical"
    labels: List[str] = Field(default_factory=list)
    n_items: int = 0
    micro_f1: Optional[float] = None
    accuracy: Optional[float] = None
    kappa: Optional[float] = None
    confusion: List[List[int]] = Field(default_factory=list)
    abstained: int = 0
    excluded_free_mentions: int = 0
    excluded_conversations: int = 0
    bootstrap: Optional[BootstrapResult] = None

    def model_dump(self, **kwargs) -> dict:
        """Override to exclude None values by default."""
        kwargs.setdefault('exclude_none', True)
        return super().model_dump(**kwargs)


class LabelDistribution(BaseModel):
    annotator: str
    counts: Dict[str, int] = Field(default_factory=dict)
    shares: Dict[str, float] = Field(default_factory=dict)
    abstained: int = 0
    free_mentions: int = 0


class JudgeFailure(BaseModel):
    conversation: str
    error: str


class AgreementBundle(BaseModel):
    """Everything the agree verb writes to agreement.json."""
    medical: List[AgreementReport] = Field(default_factory=list)
    profile: List[AgreementReport] = Field(default_factory=list)
    distributions: List[LabelDistribution] = Field(default_factory=list)
    consensus_complete: bool = True
    unresolved: List[Disagreement] = Field(default_factory=list)
    judge_failures: List[JudgeFailure] = Field(default_factory=list)

    def report(self, annotator_a: str, annotator_b: str, scope: str = "medical") -> Optional[AgreementReport]:
        pool = self.medical if scope.startswith("medical") else self.profile
        for report in pool:
            if report.annotator_a == annotator_a and report.annotator_b == annotator_b and report.scope == scope:
                return report
        return None
