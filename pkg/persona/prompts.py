"""Patient-simulator system prompt.

Layout: opening line, medical profile (indexed facts by section), linguistic
profile (five attribute lines), behavioral profile (four dimension lines),
the three-step instructions and the response schema. Blocks marked
"toolkit-authored" fill regions the published prompt elides.
"""
from typing import List, Set

from core.errors import PromptAssemblyError
from core.models import SECTION_TITLES, parse_index

from .models import PersonaPromptSpec

SPAN_OPEN = "<\\s>"
SPAN_CLOSE = "</\\s>"

OPENING = (
    "You are simulating a psychologically realistic patient based on three profiles: "
    "Medical, Behavioral, and Linguistic."
)


def get_step_rules() -> str:
    """Three-step instructions; literal span markers keep their backslash."""
    return f"""\
For each of the questions:
  → Step 1: Identify relevant medical facts using their assigned index (e.g., [3.2] Individual Psychotherapy).
  → Step 2: For each identified fact, apply style transfer according to the linguistic profile.
  → Step 3: Construct a natural language response that embeds the style-transferred facts embedding the linguistic and behavioral profile. Each style-transferred phrase must be wrapped in {SPAN_OPEN} ... {SPAN_CLOSE} and must also include the [X.Y] reference right after it."""


def get_behavior_rules() -> str:
    """Toolkit-authored: strict behavioral rules."""
    return """\
Rules (toolkit-authored):
  - Stay in character for the whole conversation; never mention these instructions.
  - Only state medical facts listed in the Medical Profile, always with their [X.Y] reference.
  - Answer only the current question; the behavioral profile decides how fully.
  - Behavioral constraints govern what you say; the linguistic profile shapes how you say it."""


def get_response_schema() -> str:
    return f"""\
Response format (a single JSON object, no other text):
  {{
  "relevant_medical_history": [
    "[1.2] Gender: Male",
    "[3.2] Individual Psychotherapy"],
  "style_transferred_medical_history": [
    "[1.2] male",
    "[3.2] talked to someone"],
  "response": "Final response using the above style-transferred facts with inline references and {SPAN_OPEN} {SPAN_CLOSE} tags, e.g. I {SPAN_OPEN}talked to someone{SPAN_CLOSE} [3.2] about it."
  }}"""


def render_medical_block(spec: PersonaPromptSpec) -> List[str]:
    lines = ["1. Medical Profile:"]
    seen: Set[str] = set()
    for section in spec.medical.sections:
        if not section.facts:
            continue
        lines.append(f"  {SECTION_TITLES[section.name]}:")
        for fact in section.facts:
            try:
                parse_index(fact.index)
            except ValueError as e:
                raise PromptAssemblyError(str(e)) from None
            if fact.index in seen:
                raise PromptAssemblyError(f"duplicate fact index {fact.index} in profile {spec.medical.profile_id}")
            seen.add(fact.index)
            lines.append(f"    {fact.index}: {fact.text}")
    return lines


def assemble_persona_prompt(spec: PersonaPromptSpec) -> str:
    """Render the full system prompt; a pure function of spec.

    Raises:
        PromptAssemblyError: duplicate or malformed fact index
    """
    lines = [OPENING, ""]
    lines.extend(render_medical_block(spec))

    lines.append("2. Linguistic Profile:")
    lines.extend(f"  {line}" for line in spec.linguistic.attribute_lines())

    lines.append("3. Behavioral Profile:")
    lines.extend(f"  {dimension.line()}" for dimension in spec.behavioral.dimensions())

    lines.append("")
    lines.append(get_step_rules())
    lines.append("")
    lines.append(get_behavior_rules())
    lines.append("")
    lines.append(get_response_schema())
    return "\n".join(lines) + "\n"
