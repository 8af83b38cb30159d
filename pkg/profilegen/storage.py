"""Profile batches on disk: one profile per JSONL line."""
from pathlib import Path
from typing import Iterable, List

from pydantic import ValidationError

from core.errors import ProfileGenerationError
from core.models import MedicalProfile
from core.utils import read_jsonl, write_jsonl


def write_profiles(profiles: Iterable[MedicalProfile], path: Path) -> int:
    return write_jsonl(Path(path), (p.model_dump(mode="json") for p in profiles))


def load_profiles(path: Path) -> List[MedicalProfile]:
    """Read a profile batch; a malformed line names its line number."""
    path = Path(path)
    if not path.exists():
        raise ProfileGenerationError(f"profile file not found: {path}")
    profiles = []
    for line_number, row in enumerate(read_jsonl(path), start=1):
        try:
            profiles.append(MedicalProfile.model_validate(row))
        except ValidationError as e:
            raise ProfileGenerationError(f"{path}:{line_number}: invalid profile: {e}") from e
    return profiles
