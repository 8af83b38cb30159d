"""Utility functions for stable seeds, hashing and JSON/JSONL files."""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator

import mmh3


def stable_seed(*parts: Any) -> int:
    """Derive a non-negative 32-bit seed from arbitrary parts.

    Same parts give the same seed on every platform and Python version
    (unlike the salted builtin hash()).

    Args:
        *parts: Values joined with "|" before hashing

    Returns:
        Seed in [0, 2**32)
    """
    key = "|".join(str(p) for p in parts)
    return mmh3.hash(key, 0, signed=False)


def get_slug(name: str) -> str:
    """Convert a name to a filesystem-safe slug.

    Args:
        name: e.g. "Structured & Cooperative"

    Returns:
        e.g. "structured_cooperative"
    """
    slug = "".join(c if c.isalnum() else "_" for c in name.lower())
    while "__" in slug:
        slug = slug.replace("__", "_")
    return slug.strip("_")


def dumps_canonical(data: Any) -> str:
    """Serialize to JSON with sorted keys and no trailing whitespace."""
    return json.dumps(data, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: Path, records: Iterable[Dict[str, Any]]) -> int:
    """Write records as one canonical JSON object per line.

    Returns:
        Number of records written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(dumps_canonical(record))
            f.write("\n")
            count += 1
    return count


def read_jsonl(path: Path) -> Iterator[Dict[str, Any]]:
    """Yield JSON objects from a JSONL file, skipping blank lines."""
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_json(path: Path, data: Any) -> Path:
    """Write indented JSON with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, ensure_ascii=False, sort_keys=True, indent=2)
        f.write("\n")
    return path


def read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
