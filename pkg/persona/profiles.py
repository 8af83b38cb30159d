"""Loading of linguistic and behavioral profile data files.

Format (``*.profile``, UTF-8): one ``key: value`` pair per line, ``#``
comment lines and blank lines ignored. The first colon separates key from
value; values are taken verbatim after one leading space. Lists
(``situations``) are ``|``-separated.
"""
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Union

from core.errors import PersonaDataError

from .models import (
    BehavioralDimension,
    BehavioralName,
    BehavioralProfile,
    LinguisticName,
    LinguisticProfile,
)

DATA_DIR = Path(__file__).parent / "data"

LINGUISTIC_KEYS = ["version", "name", "label", "experimental", "style", "tone", "vocab", "structure", "patterns"]
BEHAVIORAL_KEYS = [
    "version", "name", "label", "experimental",
    "adherence", "adherence_guidance", "engagement", "engagement_guidance",
    "topical_focus", "topical_focus_guidance", "adversarial", "adversarial_guidance",
]

# Prompt labels of the four behavioral dimensions
DIMENSION_LABELS = {
    "adherence": "Conversational Adherence",
    "engagement": "Engagement",
    "topical_focus": "Topical Focus",
    "adversarial": "Adversarial/Toxic Behavior",
}

OPERATIONAL_LINGUISTIC = list(LinguisticName)
OPERATIONAL_BEHAVIORAL = [
    BehavioralName.STRUCTURED_COOPERATIVE,
    BehavioralName.DISTRACTED_UNFOCUSED,
    BehavioralName.ADVERSARIAL_COMBATIVE,
]


def parse_profile_file(path: Path) -> Dict[str, str]:
    """Read a key-value profile file.

    Raises:
        PersonaDataError: unreadable file, line without colon, repeated key
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise PersonaDataError(f"cannot read profile file {path}: {e}") from e

    values: Dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise PersonaDataError(f"{path}:{line_no}: expected 'key: value'")
        key = key.strip()
        if key in values:
            raise PersonaDataError(f"{path}:{line_no}: repeated key '{key}'")
        values[key] = value[1:] if value.startswith(" ") else value
    return values


def _require(values: Dict[str, str], keys: List[str], path: Path) -> None:
    missing = [k for k in keys if k not in values]
    if missing:
        raise PersonaDataError(f"{path}: missing keys {', '.join(missing)}")


def _flag(value: str) -> bool:
    return value.strip().lower() in ("true", "yes", "1")


def linguistic_from_file(path: Path) -> LinguisticProfile:
    values = parse_profile_file(path)
    _require(values, LINGUISTIC_KEYS, path)
    return LinguisticProfile(
        name=LinguisticName(values["name"].strip()),
        label=values["label"],
        version=int(values["version"]),
        experimental=_flag(values["experimental"]),
        style=values["style"],
        tone=values["tone"],
        vocab=values["vocab"],
        structure=values["structure"],
        patterns=values["patterns"],
        example=values.get("example", ""),
    )


def behavioral_from_file(path: Path) -> BehavioralProfile:
    values = parse_profile_file(path)
    _require(values, BEHAVIORAL_KEYS, path)

    def dimension(key: str) -> BehavioralDimension:
        return BehavioralDimension(
            label=DIMENSION_LABELS[key],
            level=values[key],
            guidance=values[f"{key}_guidance"],
        )

    situations = [s.strip() for s in values.get("situations", "").split("|") if s.strip()]
    return BehavioralProfile(
        name=BehavioralName(values["name"].strip()),
        label=values["label"],
        version=int(values["version"]),
        experimental=_flag(values["experimental"]),
        adherence=dimension("adherence"),
        engagement=dimension("engagement"),
        topical_focus=dimension("topical_focus"),
        adversarial_behavior=dimension("adversarial"),
        situation_tags=situations,
        example=values.get("example", ""),
    )


@lru_cache(maxsize=None)
def load_linguistic(name: Union[str, LinguisticName], data_dir: Optional[Path] = None) -> LinguisticProfile:
    """Load a bundled (or data_dir) linguistic profile by name."""
    name = LinguisticName(name)
    return linguistic_from_file((data_dir or DATA_DIR) / "linguistic" / f"{name.value}.profile")


@lru_cache(maxsize=None)
def load_behavioral(name: Union[str, BehavioralName], data_dir: Optional[Path] = None) -> BehavioralProfile:
    """Load a bundled (or data_dir) behavioral profile by name."""
    name = BehavioralName(name)
    return behavioral_from_file((data_dir or DATA_DIR) / "behavioral" / f"{name.value}.profile")


def all_linguistic() -> List[LinguisticProfile]:
    return [load_linguistic(n) for n in OPERATIONAL_LINGUISTIC]


def all_behavioral(include_experimental: bool = False) -> List[BehavioralProfile]:
    names = list(BehavioralName) if include_experimental else OPERATIONAL_BEHAVIORAL
    return [load_behavioral(n) for n in names]
