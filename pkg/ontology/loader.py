"""Concept table reading and writing.

Column order: id, vocabulary, display_name, parent_ids. Parent ids are
separated by "|" and may be empty.
"""
import csv
import logging
from pathlib import Path
from typing import List

from core.errors import OntologyStructureError
from core.models import ConceptCode, Vocabulary

from .graph import Ontology
from .models import Concept

logger = logging.getLogger("patsim.ontology")

COLUMNS = ["id", "vocabulary", "display_name", "parent_ids"]
PARENT_SEPARATOR = "|"


def load_ontology(path: Path) -> Ontology:
    """Read a concept table and build the validated ontology.

    Raises:
        OntologyStructureError: bad header, unknown vocabulary, cycle, duplicate
        OntologyResolutionError: dangling parent id
    """
    concepts: List[Concept] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise OntologyStructureError(f"{path}: missing columns {', '.join(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                vocabulary = Vocabulary(row["vocabulary"].strip().lower())
            except ValueError:
                raise OntologyStructureError(
                    f"{path}:{line_no}: unknown vocabulary {row['vocabulary']!r}", code=row["id"]
                ) from None
            parents = tuple(
                p.strip() for p in (row.get("parent_ids") or "").split(PARENT_SEPARATOR) if p.strip()
            )
            concepts.append(Concept(
                code=ConceptCode(id=row["id"].strip(), vocabulary=vocabulary),
                display_name=row["display_name"].strip(),
                parent_ids=parents,
            ))
    ontology = Ontology(concepts)
    logger.debug(f"[Ontology] Loaded {len(ontology)} concepts from {path}")
    return ontology


def write_ontology(ontology: Ontology, path: Path) -> Path:
    """Write the concept table in load_ontology's format, rows sorted by code."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=COLUMNS, extrasaction='ignore', lineterminator="\n")
        writer.writeheader()
        for concept in ontology.concepts():
            writer.writerow({
                "id": concept.code.id,
                "vocabulary": concept.code.vocabulary.value,
                "display_name": concept.display_name,
                "parent_ids": PARENT_SEPARATOR.join(concept.parent_ids),
            })
    return path
