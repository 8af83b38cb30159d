"""Parser for the simulator's JSON reply schema.

A reply is one JSON object with three fields:
    relevant_medical_history          list of "[X.Y] fact" strings
    style_transferred_medical_history list of "[X.Y] paraphrase" strings
    response                          text; each paraphrase wrapped in
                                      <\\s> ... </\\s> and followed by [X.Y]

Models often emit the span markers with a bare backslash, which is not a
legal JSON escape; those are escaped before decoding.
"""
import json
import re
from typing import List, Optional, Tuple

from core.errors import SchemaParseError, SchemaValidationError
from core.utils import dumps_canonical
from persona.prompts import SPAN_CLOSE, SPAN_OPEN

from .models import FactTag, SimulatorTurn

FIELDS = ("relevant_medical_history", "style_transferred_medical_history", "response")

TAG_PATTERN = re.compile(r"\[(\d+\.\d+)\]")
ENTRY_PATTERN = re.compile(r"^\s*\[(\d+\.\d+)\]")
_FENCE = re.compile(r"^\s*```(?:json)?\s*(.*?)\s*```\s*$", re.DOTALL)
_BARE_SPAN_ESCAPE = re.compile(r"(?<!\\)\\s>")
_MARKER = re.compile(re.escape(SPAN_OPEN) + "|" + re.escape(SPAN_CLOSE))
_TAG_AFTER_SPAN = re.compile(r"\s*\[(\d+\.\d+)\]")

MISSING_FIELD = "missing_field"
DANGLING_INDEX = "dangling_index"
MALFORMED_SPAN = "malformed_span"


def _decode(raw: str) -> dict:
    text = raw.strip()
    fence = _FENCE.match(text)
    if fence:
        text = fence.group(1)
    text = _BARE_SPAN_ESCAPE.sub(r"\\\\s>", text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaParseError(f"reply is not JSON: {e}", raw=raw) from None
    if not isinstance(data, dict):
        raise SchemaParseError(f"reply is JSON {type(data).__name__}, expected object", raw=raw)
    return data


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


def scan_spans(response: str) -> Tuple[List[FactTag], List[Tuple[str, str]]]:
    """Extract tags and span problems from a response text."""
    violations: List[Tuple[str, str]] = []
    span_for_tag = {}
    open_at: Optional[int] = None
    for marker in _MARKER.finditer(response):
        if marker.group() == SPAN_OPEN:
            if open_at is not None:
                violations.append((MALFORMED_SPAN, f"nested span at char {marker.start()}"))
                continue
            open_at = marker.end()
            continue
        if open_at is None:
            violations.append((MALFORMED_SPAN, f"span close without open at char {marker.start()}"))
            continue
        span_text = response[open_at:marker.start()]
        open_at = None
        follow = _TAG_AFTER_SPAN.match(response, marker.end())
        if not follow:
            violations.append((MALFORMED_SPAN, f"span '{span_text.strip()}' not followed by [X.Y]"))
            continue
        span_for_tag[follow.start(1) - 1] = span_text.strip()
    if open_at is not None:
        violations.append((MALFORMED_SPAN, f"unclosed span at char {open_at - len(SPAN_OPEN)}"))

    tags = [
        FactTag(
            index=m.group(1),
            start=_byte_offset(response, m.start()),
            end=_byte_offset(response, m.end()),
            span=span_for_tag.get(m.start()),
        )
        for m in TAG_PATTERN.finditer(response)
    ]
    return tags, violations


def entry_index(entry: str) -> Optional[str]:
    match = ENTRY_PATTERN.match(entry)
    return match.group(1) if match else None


def entry_text(entry: str) -> str:
    """Entry without its leading "[X.Y]"."""
    return ENTRY_PATTERN.sub("", entry, count=1).strip()


def parse_simulator_turn(raw: str) -> SimulatorTurn:
    """Parse and validate one simulator reply.

    Raises:
        SchemaParseError: not a JSON object (raw text kept on the error)
        SchemaValidationError: classified violations
    """
    data = _decode(raw)
    violations: List[Tuple[str, str]] = []

    for name in FIELDS[:2]:
        value = data.get(name)
        if value is None:
            violations.append((MISSING_FIELD, f"'{name}' absent or null"))
        elif not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            violations.append((MISSING_FIELD, f"'{name}' must be a list of strings"))
    response = data.get("response")
    if response is None:
        violations.append((MISSING_FIELD, "'response' absent or null"))
    elif not isinstance(response, str):
        violations.append((MISSING_FIELD, "'response' must be a string"))
    if violations:
        raise SchemaValidationError(violations, raw=raw)

    relevant = data["relevant_medical_history"]
    styled = data["style_transferred_medical_history"]

    relevant_idx = set()
    for entry in relevant:
        idx = entry_index(entry)
        if idx is None:
            violations.append((MALFORMED_SPAN, f"relevant entry without [X.Y]: {entry!r}"))
        else:
            relevant_idx.add(idx)
    for entry in styled:
        idx = entry_index(entry)
        if idx is None:
            violations.append((MALFORMED_SPAN, f"style-transferred entry without [X.Y]: {entry!r}"))
        elif idx not in relevant_idx:
            violations.append((DANGLING_INDEX, f"style-transferred [{idx}] not in relevant history"))

    tags, span_violations = scan_spans(response)
    violations.extend(span_violations)
    dangling = sorted({t.index for t in tags if t.index not in relevant_idx})
    for idx in dangling:
        violations.append((DANGLING_INDEX, f"response cites [{idx}] not in relevant history"))

    if violations:
        raise SchemaValidationError(violations, raw=raw)

    return SimulatorTurn(
        relevant_medical_history=list(relevant),
        style_transferred_medical_history=list(styled),
        response=response,
        tags=tags,
    )


def serialize_simulator_turn(turn: SimulatorTurn) -> str:
    """Canonical JSON of the three schema fields; parses back to an equal turn."""
    return dumps_canonical({name: getattr(turn, name) for name in FIELDS})


def plain_response(response: str) -> str:
    """Utterance as the decision aid hears it: markers and tags removed."""
    text = _MARKER.sub("", response)
    text = TAG_PATTERN.sub("", text)
    text = re.sub(r"\s+([,.;:!?])", r"\1", text)
    return re.sub(r"\s+", " ", text).strip()
