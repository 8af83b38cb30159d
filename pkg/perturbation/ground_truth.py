"""Perturbation ground-truth file: one JSON record per replaced fact."""
from pathlib import Path
from typing import Dict, Iterable, List

from core.utils import read_jsonl, write_jsonl

from .models import PerturbationRecord


def write_ground_truth(records: Iterable[PerturbationRecord], path: Path) -> int:
    return write_jsonl(path, (r.model_dump(mode="json") for r in records))


def load_ground_truth(path: Path) -> List[PerturbationRecord]:
    return [PerturbationRecord.model_validate(row) for row in read_jsonl(path)]


def answer_key(records: Iterable[PerturbationRecord]) -> Dict[str, Dict[str, PerturbationRecord]]:
    """profile id -> fact index -> record."""
    key: Dict[str, Dict[str, PerturbationRecord]] = {}
    for record in records:
        key.setdefault(record.profile_id, {})[record.index] = record
    return key
