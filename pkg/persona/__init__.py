"""Linguistic and behavioral personas and the simulator system prompt."""
from .models import (
    BehavioralName,
    BehavioralProfile,
    LinguisticName,
    LinguisticProfile,
    PersonaPromptSpec,
)
from .profiles import (
    OPERATIONAL_BEHAVIORAL,
    OPERATIONAL_LINGUISTIC,
    all_behavioral,
    all_linguistic,
    load_behavioral,
    load_linguistic,
    parse_profile_file,
)
from .prompts import SPAN_CLOSE, SPAN_OPEN, assemble_persona_prompt

__all__ = [
    "BehavioralName",
    "BehavioralProfile",
    "LinguisticName",
    "LinguisticProfile",
    "OPERATIONAL_BEHAVIORAL",
    "OPERATIONAL_LINGUISTIC",
    "PersonaPromptSpec",
    "SPAN_CLOSE",
    "SPAN_OPEN",
    "all_behavioral",
    "all_linguistic",
    "assemble_persona_prompt",
    "load_behavioral",
    "load_linguistic",
    "parse_profile_file",
]
