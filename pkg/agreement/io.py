"""Annotation files: delimited text, one judgment per row."""
import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List

from pydantic import ValidationError

from core.errors import AnnotationFormatError

from .models import AnnotationItem, AnnotationSet, AnnotationStatus, Disagreement

logger = logging.getLogger("patsim.agreement")

ANNOTATION_COLUMNS = ["conversation", "turn", "key", "annotator", "label"]
RESOLUTION_COLUMNS = [*ANNOTATION_COLUMNS, "label_a", "label_b"]
ABSTAIN_LABEL = "ABSTAIN"


def _row(item: AnnotationItem) -> Dict[str, object]:
    return {
        "conversation": item.conversation,
        "turn": item.turn,
        "key": item.key,
        "annotator": item.annotator,
        "label": item.label if item.labeled else ABSTAIN_LABEL,
    }


def write_annotations(annotations: AnnotationSet, path: Path) -> Path:
    """Rows sorted by (conversation, turn, key, annotator)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    items = sorted(annotations.items, key=lambda i: (*i.item_key, i.annotator))
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=ANNOTATION_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for item in items:
            writer.writerow(_row(item))
    logger.info(f"[Agreement] wrote {len(items)} judgments to {path}")
    return path


def parse_rows(rows: Iterable[Dict[str, str]], source: str = "<rows>") -> AnnotationSet:
    """Build an AnnotationSet from annotation-file rows.

    An empty or "ABSTAIN" label is an abstention. Row numbers in errors are
    1-based and count the header.
    """
    items: List[AnnotationItem] = []
    for number, row in enumerate(rows, start=2):
        missing = [c for c in ANNOTATION_COLUMNS if c not in row or row[c] is None]
        if missing:
            raise AnnotationFormatError(f"{source} row {number}: missing columns {missing}")
        label = row["label"].strip()
        abstain = label in ("", ABSTAIN_LABEL)
        try:
            items.append(AnnotationItem(
                conversation=row["conversation"].strip(),
                turn=int(row["turn"]),
                key=row["key"].strip(),
                annotator=row["annotator"].strip(),
                label=None if abstain else label,
                status=AnnotationStatus.ABSTAIN if abstain else AnnotationStatus.LABELED,
            ))
        except (ValueError, ValidationError) as e:
            raise AnnotationFormatError(f"{source} row {number}: {e}") from e
    try:
        return AnnotationSet(items=items)
    except ValidationError as e:
        raise AnnotationFormatError(f"{source}: {e}") from e


def read_annotations(path: Path) -> AnnotationSet:
    path = Path(path)
    if not path.exists():
        raise AnnotationFormatError(f"annotation file not found: {path}")
    with open(path, "r", newline="", encoding="utf-8") as f:
        return parse_rows(csv.DictReader(f), source=str(path))


def write_resolution_template(disagreements: Iterable[Disagreement], path: Path, annotator: str = "consensus") -> Path:
    """Annotation-shaped file with blank labels for each open disagreement.

    Fill in the label column and pass the file back as the resolution file;
    the label_a and label_b columns are ignored on reading.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=RESOLUTION_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for d in disagreements:
            writer.writerow({
                "conversation": d.conversation,
                "turn": d.turn,
                "key": d.key,
                "annotator": annotator,
                "label": "",
                "label_a": d.label_a or ABSTAIN_LABEL,
                "label_b": d.label_b or ABSTAIN_LABEL,
            })
    return path
