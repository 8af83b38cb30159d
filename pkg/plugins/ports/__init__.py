"""Ports to the toolkit's external collaborators.

Importing this package registers every bundled implementation with
PortRegistry.
"""
from .base import (
    NO_RECOMMENDATION,
    STAGE_ORDER,
    AidQuestion,
    ChatMessage,
    ChatPort,
    ClassifierPort,
    EmbeddingPort,
    IntakeRecord,
    IntakeStage,
    Port,
    PortKind,
    Recommendation,
    RetrievalTrace,
    SingleFlight,
    SutPort,
    guard,
)
from .registry import PortRegistry
from .classifiers import DepressionKeywordClassifier, HttpClassifier, KeywordClassifier, ToxicityKeywordClassifier
from .embedders import HashEmbedder, OpenAIEmbedder
from .http_sut import HttpDecisionAid
from .openai_chat import OpenAIChat
from .stub_aid import STAGE_QUESTIONS, STAGE_WORDING, DrugFeatureTable, StubDecisionAid
from .stub_judge import AnswerKeyJudge
from .stub_patient import StubPatient

__all__ = [
    "AidQuestion",
    "AnswerKeyJudge",
    "ChatMessage",
    "ChatPort",
    "ClassifierPort",
    "DepressionKeywordClassifier",
    "DrugFeatureTable",
    "EmbeddingPort",
    "HashEmbedder",
    "HttpClassifier",
    "HttpDecisionAid",
    "IntakeRecord",
    "IntakeStage",
    "KeywordClassifier",
    "NO_RECOMMENDATION",
    "OpenAIChat",
    "OpenAIEmbedder",
    "Port",
    "PortKind",
    "PortRegistry",
    "Recommendation",
    "RetrievalTrace",
    "STAGE_ORDER",
    "STAGE_QUESTIONS",
    "STAGE_WORDING",
    "SingleFlight",
    "StubDecisionAid",
    "StubPatient",
    "SutPort",
    "ToxicityKeywordClassifier",
    "guard",
]
