"""Persona data models."""
from enum import Enum
from typing import List

from pydantic import BaseModel, ConfigDict, Field

from core.models import MedicalProfile


class LinguisticName(str, Enum):
    LIMITED_HL = "limited_hl"
    FUNCTIONAL_HL = "functional_hl"
    PROFICIENT_HL = "proficient_hl"
    DEPRESSION = "depression"
    ILLNESS_ANXIETY = "illness_anxiety"


class BehavioralName(str, Enum):
    STRUCTURED_COOPERATIVE = "structured_cooperative"
    DISTRACTED_UNFOCUSED = "distracted_unfocused"
    ADVERSARIAL_COMBATIVE = "adversarial_combative"
    INQUISITIVE_OPEN_ENDED = "inquisitive_open_ended"
    RESERVED_MINIMALIST = "reserved_minimalist"


class LinguisticProfile(BaseModel):
    """How a simulated patient expresses medical facts."""
    model_config = ConfigDict(frozen=True)

    name: LinguisticName
    label: str
    version: int = 1
    experimental: bool = False
    style: str
    tone: str
    vocab: str
    structure: str
    patterns: str
    example: str = ""

    def attribute_lines(self) -> List[str]:
        return [
            f"Style: {self.style}",
            f"Tone: {self.tone}",
            f"Vocab: {self.vocab}",
            f"Structure: {self.structure}",
            f"Patterns: {self.patterns}",
        ]


class BehavioralDimension(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    level: str
    guidance: str

    def line(self) -> str:
        return f"{self.label}: {self.level}. {self.guidance}"


class BehavioralProfile(BaseModel):
    """How a simulated patient engages with the conversation."""
    model_config = ConfigDict(frozen=True)

    name: BehavioralName
    label: str
    version: int = 1
    experimental: bool = False
    adherence: BehavioralDimension
    engagement: BehavioralDimension
    topical_focus: BehavioralDimension
    adversarial_behavior: BehavioralDimension
    situation_tags: List[str] = Field(default_factory=list)
    example: str = ""

    def dimensions(self) -> List[BehavioralDimension]:
        return [self.adherence, self.engagement, self.topical_focus, self.adversarial_behavior]


class PersonaPromptSpec(BaseModel):
    """Everything the simulator prompt is rendered from."""
    medical: MedicalProfile
    linguistic: LinguisticProfile
    behavioral: BehavioralProfile
