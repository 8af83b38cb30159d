"""Conversation, turn and experiment-manifest models."""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from core.models import MedicalProfile
from plugins.ports.base import IntakeRecord, IntakeStage


class FactTag(BaseModel):
    """One "[X.Y]" reference in a response, with UTF-8 byte offsets."""
    index: str
    start: int
    end: int
    span: Optional[str] = None  # paraphrase wrapped in the preceding span markers


class SimulatorTurn(BaseModel):
    """A validated simulator reply."""
    relevant_medical_history: List[str] = Field(default_factory=list)
    style_transferred_medical_history: List[str] = Field(default_factory=list)
    response: str = ""
    tags: List[FactTag] = Field(default_factory=list)

    def referenced_indices(self) -> List[str]:
        """Indices cited in the response, first-occurrence order."""
        seen: List[str] = []
        for tag in self.tags:
            if tag.index not in seen:
                seen.append(tag.index)
        return seen


class TurnStatus(str, Enum):
    OK = "ok"
    PARSE_FAILED = "parse_failed"


class ConversationStatus(str, Enum):
    COMPLETED = "completed"
    ABORTED = "aborted"
    FAILED = "failed"


class AbortReason(str, Enum):
    TURN_CAP = "turn_cap"
    WALL_CLOCK = "wall_clock"
    PORT_ERROR = "port_error"


class ConversationTurn(BaseModel):
    """One aid question and the simulator's answer to it."""
    number: int
    stage: IntakeStage
    aid_utterance: str
    status: TurnStatus = TurnStatus.OK
    attempts: int = 1
    raw: str = ""
    patient_text: str = ""
    turn: Optional[SimulatorTurn] = None
    violations: List[List[str]] = Field(default_factory=list)


class ConversationLimits(BaseModel):
    max_turns: int = Field(default=30, ge=0)
    wall_clock_seconds: Optional[float] = None
    max_retries: int = Field(default=2, ge=0)


class Conversation(BaseModel):
    """A complete (or aborted) simulated conversation and its context."""
    conversation_id: str
    profile_id: str
    linguistic: str
    behavioral: str
    seed: int
    profile: MedicalProfile
    chat_port: str = ""
    sut_port: str = ""
    stage_wording: str = ""
    turns: List[ConversationTurn] = Field(default_factory=list)
    final_recommendation: Optional[str] = None
    closing_utterance: Optional[str] = None
    status: ConversationStatus = ConversationStatus.COMPLETED
    abort_reason: Optional[AbortReason] = None
    error: Optional[str] = None
    intake: Optional[IntakeRecord] = None

    @property
    def cell(self) -> str:
        return f"{self.linguistic}/{self.behavioral}"

    @property
    def stage_labels(self) -> List[IntakeStage]:
        labels = [t.stage for t in self.turns]
        if self.final_recommendation is not None:
            labels.append(IntakeStage.RECOMMENDATION)
        return labels

    def ok_turns(self) -> List[ConversationTurn]:
        return [t for t in self.turns if t.status == TurnStatus.OK and t.turn is not None]

    def model_dump(self, **kwargs) -> dict:
        """Override to exclude None values by default."""
        kwargs.setdefault('exclude_none', True)
        return super().model_dump(**kwargs)


# --- experiment -------------------------------------------------------------

class ProfileSelector(BaseModel):
    """Which profiles of the pool a setting uses: explicit ids, or the first N (None = all)."""
    ids: Optional[List[str]] = None
    first: Optional[int] = Field(default=None, ge=0)


class DesignSetting(BaseModel):
    name: str
    linguistic: List[str]
    behavioral: List[str]
    profiles: ProfileSelector = Field(default_factory=ProfileSelector)


class ExperimentDesign(BaseModel):
    design_id: str = "custom"
    replicates: int = Field(default=1, ge=1)
    settings: List[DesignSetting] = Field(default_factory=list)


class PlannedConversation(BaseModel):
    conversation_id: str
    profile_id: str
    linguistic: str
    behavioral: str
    replicate: int = 0
    seed: int
    settings: List[str] = Field(default_factory=list)


class ManifestEntry(BaseModel):
    conversation_id: str
    profile_id: str
    linguistic: str
    behavioral: str
    settings: List[str] = Field(default_factory=list)
    log: Optional[str] = None
    status: ConversationStatus
    abort_reason: Optional[AbortReason] = None
    error: Optional[str] = None


class ManifestCell(BaseModel):
    linguistic: str
    behavioral: str
    profile_ids: List[str] = Field(default_factory=list)
    count: int = 0
    logs: List[str] = Field(default_factory=list)
    failed: int = 0


class ExperimentManifest(BaseModel):
    """Cell -> log files index for one experiment run."""
    design_id: str
    seed: int
    toolkit_version: str
    mode: str = "stub"
    settings: Dict[str, int] = Field(default_factory=dict)
    cells: List[ManifestCell] = Field(default_factory=list)
    conversations: List[ManifestEntry] = Field(default_factory=list)

    def cell(self, linguistic: str, behavioral: str) -> Optional[ManifestCell]:
        for cell in self.cells:
            if cell.linguistic == linguistic and cell.behavioral == behavioral:
                return cell
        return None

    def model_dump(self, **kwargs) -> dict:
        """Override to exclude None values by default."""
        kwargs.setdefault('exclude_none', True)
        return super().model_dump(**kwargs)
