"""Conversation loop between the patient simulator and the decision aid.

The aid asks, the simulator answers; every answer is parsed against the
reply schema and re-requested up to max_retries times before the turn is
kept as parse_failed. The loop ends when the aid reaches the
recommendation stage or a turn/time cap is hit.

The two sides see different histories: the aid hears the plain utterance,
the simulator sees its own previous replies as canonical JSON.
"""
import logging
import time
from pathlib import Path
from typing import List, Optional

from core.errors import PortError, SchemaParseError, SchemaValidationError
from core.utils import read_jsonl, write_jsonl
from persona import PersonaPromptSpec, assemble_persona_prompt
from plugins.ports.base import ChatMessage, ChatPort, IntakeStage, SutPort

from .models import (
    AbortReason,
    Conversation,
    ConversationLimits,
    ConversationStatus,
    ConversationTurn,
    TurnStatus,
)
from .schema import parse_simulator_turn, plain_response, serialize_simulator_turn

logger = logging.getLogger("patsim.orchestrator")

LOG_SCHEMA_VERSION = 1


def _port_name(port) -> str:
    wrapped = getattr(port, "wrapped", port)
    return getattr(wrapped, "name", type(wrapped).__name__)


def run_conversation(
    persona: PersonaPromptSpec,
    chat: ChatPort,
    sut: SutPort,
    limits: ConversationLimits,
    conversation_id: Optional[str] = None,
    seed: int = 0,
    stage_wording: str = "",
) -> Conversation:
    """Run one conversation to a recommendation or a cap.

    Transport failures abort the conversation; everything collected up to
    that point stays in the returned log.
    """
    system_prompt = assemble_persona_prompt(persona)
    conversation = Conversation(
        conversation_id=conversation_id or persona.medical.profile_id,
        profile_id=persona.medical.profile_id,
        linguistic=persona.linguistic.name.value,
        behavioral=persona.behavioral.name.value,
        seed=seed,
        profile=persona.medical,
        chat_port=_port_name(chat),
        sut_port=_port_name(sut),
        stage_wording=stage_wording,
    )
    aid_history: List[ChatMessage] = []
    sim_history: List[ChatMessage] = []
    started = time.monotonic()

    def abort(reason: AbortReason, error: Optional[str] = None) -> Conversation:
        conversation.status = ConversationStatus.ABORTED
        conversation.abort_reason = reason
        conversation.error = error
        logger.info(f"[Conversation] {conversation.conversation_id} aborted: {reason.value}")
        return conversation

    try:
        while True:
            if limits.wall_clock_seconds is not None and time.monotonic() - started > limits.wall_clock_seconds:
                return abort(AbortReason.WALL_CLOCK)

            question = sut.next_question(aid_history)
            if question.stage == IntakeStage.RECOMMENDATION:
                aid_history.append(ChatMessage("aid", question.utterance))
                recommendation = sut.recommend(aid_history)
                conversation.final_recommendation = recommendation.recommendation
                conversation.closing_utterance = recommendation.utterance or question.utterance
                conversation.intake = sut.intake(aid_history)
                conversation.status = ConversationStatus.COMPLETED
                return conversation

            if len(conversation.turns) >= limits.max_turns:
                conversation.intake = sut.intake(aid_history)
                return abort(AbortReason.TURN_CAP)

            aid_history.append(ChatMessage("aid", question.utterance))
            sim_history.append(ChatMessage("aid", question.utterance))
            turn = ConversationTurn(
                number=len(conversation.turns) + 1,
                stage=question.stage,
                aid_utterance=question.utterance,
            )

            for attempt in range(1, limits.max_retries + 2):
                raw = chat.request(system_prompt, sim_history)
                turn.attempts = attempt
                turn.raw = raw
                try:
                    parsed = parse_simulator_turn(raw)
                except SchemaValidationError as e:
                    turn.violations = [[kind, detail] for kind, detail in e.violations]
                    logger.debug(f"[Conversation] {conversation.conversation_id} turn {turn.number} attempt {attempt}: {e}")
                    continue
                except SchemaParseError as e:
                    turn.violations = [["unparseable", str(e)]]
                    logger.debug(f"[Conversation] {conversation.conversation_id} turn {turn.number} attempt {attempt}: {e}")
                    continue
                turn.turn = parsed
                turn.status = TurnStatus.OK
                turn.violations = []
                turn.patient_text = plain_response(parsed.response)
                sim_history.append(ChatMessage("patient", serialize_simulator_turn(parsed)))
                break
            else:
                turn.status = TurnStatus.PARSE_FAILED
                turn.patient_text = ""
                sim_history.append(ChatMessage("patient", raw))
                logger.warning(
                    f"[Conversation] {conversation.conversation_id} turn {turn.number} parse_failed after {turn.attempts} attempts"
                )

            aid_history.append(ChatMessage("patient", turn.patient_text))
            conversation.turns.append(turn)
    except PortError as e:
        return abort(AbortReason.PORT_ERROR, str(e))


# --- conversation log files -------------------------------------------------

def conversation_records(conversation: Conversation) -> List[dict]:
    """Header, one record per turn, then the outcome record."""
    data = conversation.model_dump(mode="json")
    header = {
        "record": "header",
        "schema_version": LOG_SCHEMA_VERSION,
        "conversation_id": data["conversation_id"],
        "profile_id": data["profile_id"],
        "linguistic": data["linguistic"],
        "behavioral": data["behavioral"],
        "seed": data["seed"],
        "chat_port": data["chat_port"],
        "sut_port": data["sut_port"],
        "stage_wording": data["stage_wording"],
        "profile": data["profile"],
    }
    records = [header]
    records.extend({"record": "turn", **turn} for turn in data["turns"])
    outcome = {"record": "outcome", "status": data["status"]}
    for key in ("abort_reason", "error", "final_recommendation", "closing_utterance", "intake"):
        if key in data:
            outcome[key] = data[key]
    records.append(outcome)
    return records


def write_conversation_log(conversation: Conversation, path: Path) -> Path:
    write_jsonl(path, conversation_records(conversation))
    return Path(path)


def read_conversation_log(path: Path) -> Conversation:
    """Rebuild a Conversation from its log file.

    Raises:
        ValueError: missing header or outcome record
    """
    header, outcome, turns = None, None, []
    for record in read_jsonl(path):
        kind = record.pop("record", None)
        if kind == "header":
            header = record
        elif kind == "turn":
            turns.append(record)
        elif kind == "outcome":
            outcome = record
    if header is None or outcome is None:
        raise ValueError(f"{path}: conversation log needs a header and an outcome record")
    header.pop("schema_version", None)
    return Conversation.model_validate({**header, **outcome, "turns": turns})


def load_conversation_logs(log_dir: Path) -> List[Conversation]:
    """Every *.jsonl log in a directory, sorted by conversation id."""
    conversations = [read_conversation_log(p) for p in sorted(Path(log_dir).glob("*.jsonl"))]
    return sorted(conversations, key=lambda c: c.conversation_id)
