"""Base classes for external-system ports.

Every collaborator outside the toolkit (patient chat model, decision aid
under test, text embedder, text classifiers) is reached through one of the
port ABCs below. Offline stubs and live HTTP implementations share the
contract, so the orchestrator and metrics never know which one they hold.
"""
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from core.models import ConceptCode


class PortKind(str, Enum):
    CHAT = "chat"
    SUT = "sut"
    EMBEDDING = "embedding"
    CLASSIFIER = "classifier"


class IntakeStage(str, Enum):
    """Decision-aid intake stages in their fixed order."""
    RAPPORT = "rapport"
    ILLNESS_HISTORY = "illness_history"
    ANTIDEPRESSANT_HISTORY = "antidepressant_history"
    CURRENT_MEDICATIONS = "current_medications"
    PROCEDURES = "procedures"
    RECOMMENDATION = "recommendation"

    @property
    def position(self) -> int:
        return STAGE_ORDER.index(self)


STAGE_ORDER = list(IntakeStage)

NO_RECOMMENDATION = "NO_RECOMMENDATION"


@dataclass(frozen=True)
class ChatMessage:
    """One message of the running conversation.

    Attributes:
        role: "aid" for the decision aid, "patient" for the simulator
        content: plain text as the other side sees it
    """
    role: str
    content: str


@dataclass(frozen=True)
class AidQuestion:
    stage: IntakeStage
    utterance: str


class Recommendation(BaseModel):
    """Final recommendation: an outcome concept id or NO_RECOMMENDATION."""
    recommendation: str = NO_RECOMMENDATION
    utterance: str = ""


class RetrievalTrace(BaseModel):
    """Ranked normalization candidates for one patient phrase."""
    turn: int
    phrase: str
    candidates: List[ConceptCode] = Field(default_factory=list)
    scores: List[float] = Field(default_factory=list)


class IntakeRecord(BaseModel):
    """Concepts the decision aid extracted, with retrieval traces."""
    extracted: List[ConceptCode] = Field(default_factory=list)
    traces: List[RetrievalTrace] = Field(default_factory=list)


class Port(ABC):
    """Abstract base class for all ports.

    Class Attributes:
        kind: which contract the port implements
        name: unique identifier within its kind (e.g. "stub", "openai")
        description: human-readable description
        requires_auth: whether credentials are needed
        concurrent_safe: False if calls must be serialized across threads
    """

    kind: PortKind = PortKind.CHAT
    name: str = "base"
    description: str = "Base port"
    requires_auth: bool = False
    concurrent_safe: bool = True

    def is_configured(self) -> bool:
        """Check if the port has what it needs (endpoint, key)."""
        return True


class ChatPort(Port):
    """Chat-completion contract: system prompt plus history in, text out."""

    kind = PortKind.CHAT

    @abstractmethod
    def request(self, system_prompt: str, messages: List[ChatMessage]) -> str:
        """Return the model's raw reply.

        Raises:
            PortError: transport failure
        """


class SutPort(Port):
    """Contract of the decision aid under test."""

    kind = PortKind.SUT

    @abstractmethod
    def next_question(self, history: List[ChatMessage]) -> AidQuestion:
        """Next aid utterance with its intake stage."""

    @abstractmethod
    def recommend(self, history: List[ChatMessage]) -> Recommendation:
        """Final recommendation for the conversation so far."""

    @abstractmethod
    def intake(self, history: List[ChatMessage]) -> IntakeRecord:
        """Extracted concepts and retrieval traces for the conversation so far."""


class EmbeddingPort(Port):
    """Text embedding contract."""

    kind = PortKind.EMBEDDING
    dimension: int = 0

    @abstractmethod
    def embed(self, texts: List[str]) -> np.ndarray:
        """Return an array of shape (len(texts), dimension)."""


class ClassifierPort(Port):
    """Binary text classifier returning a probability."""

    kind = PortKind.CLASSIFIER
    label: str = "positive"

    @abstractmethod
    def score(self, text: str) -> float:
        """Probability in [0, 1] that the text carries `label`."""


class SingleFlight:
    """Proxy that serializes every method call on a non-thread-safe port."""

    def __init__(self, port: Port):
        self._port = port
        self._lock = threading.Lock()

    @property
    def wrapped(self) -> Port:
        return self._port

    def __getattr__(self, attr: str) -> Any:
        value = getattr(self._port, attr)
        if not callable(value):
            return value

        def call(*args, **kwargs):
            with self._lock:
                return value(*args, **kwargs)

        return call


def guard(port: Optional[Port]) -> Any:
    """Wrap a port in SingleFlight unless it declares itself concurrent-safe."""
    if port is None or port.concurrent_safe:
        return port
    return SingleFlight(port)
