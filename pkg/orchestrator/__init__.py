"""Conversation orchestration, simulator reply parsing and experiment runs."""
from .engine import (
    conversation_records,
    load_conversation_logs,
    read_conversation_log,
    run_conversation,
    write_conversation_log,
)
from .experiment import (
    TOOLKIT_VERSION,
    full_design,
    load_design,
    load_manifest,
    plan_conversations,
    run_experiment,
    save_design,
)
from .models import (
    AbortReason,
    Conversation,
    ConversationLimits,
    ConversationStatus,
    ConversationTurn,
    DesignSetting,
    ExperimentDesign,
    ExperimentManifest,
    FactTag,
    PlannedConversation,
    ProfileSelector,
    SimulatorTurn,
    TurnStatus,
)
from .schema import parse_simulator_turn, plain_response, serialize_simulator_turn

__all__ = [
    "AbortReason",
    "Conversation",
    "ConversationLimits",
    "ConversationStatus",
    "ConversationTurn",
    "DesignSetting",
    "ExperimentDesign",
    "ExperimentManifest",
    "FactTag",
    "PlannedConversation",
    "ProfileSelector",
    "SimulatorTurn",
    "TOOLKIT_VERSION",
    "TurnStatus",
    "conversation_records",
    "full_design",
    "load_conversation_logs",
    "load_design",
    "load_manifest",
    "parse_simulator_turn",
    "plain_response",
    "plan_conversations",
    "read_conversation_log",
    "run_conversation",
    "run_experiment",
    "save_design",
    "serialize_simulator_turn",
]
