"""Patient record ingestion.

Input is JSONL, one patient per line:

    {"patient_id": "p0001",
     "concepts": ["diagnosis:f32", "demographic:female", ...],
     "outcomes": {"outcome:resp_sertraline": true}}

Codes may be qualified ("vocabulary:id") or bare ids when unambiguous.
"""
import json
import logging
from pathlib import Path
from typing import Iterable, List

from core.errors import CohortIngestError, ConceptLookupError
from core.models import Vocabulary
from core.utils import write_jsonl
from ontology import Ontology

from .models import OutcomeFlag, PatientRecord

logger = logging.getLogger("patsim.cohort")


def parse_record(row: dict, ontology: Ontology, row_number: int) -> PatientRecord:
    """Validate one raw row against the ontology."""
    patient_id = row.get("patient_id")
    if not patient_id or not isinstance(patient_id, str):
        raise CohortIngestError("missing patient_id", row=row_number)

    raw_concepts = row.get("concepts", [])
    raw_outcomes = row.get("outcomes", {})
    if not isinstance(raw_concepts, list) or not isinstance(raw_outcomes, dict):
        raise CohortIngestError("concepts must be a list and outcomes an object", row=row_number)

    try:
        concepts = [ontology.resolve(c) for c in raw_concepts]
        outcomes = [OutcomeFlag(code=ontology.resolve(k), responded=bool(v)) for k, v in raw_outcomes.items()]
    except ConceptLookupError as e:
        raise CohortIngestError(str(e), row=row_number) from None

    if len(set(concepts)) != len(concepts):
        raise CohortIngestError(f"duplicate concept for patient {patient_id}", row=row_number)
    misplaced = [c for c in concepts if c.vocabulary == Vocabulary.OUTCOME]
    if misplaced:
        raise CohortIngestError(f"outcome concept {misplaced[0]} listed as a feature", row=row_number)
    not_outcomes = [o.code for o in outcomes if o.code.vocabulary != Vocabulary.OUTCOME]
    if not_outcomes:
        raise CohortIngestError(f"{not_outcomes[0]} is not an outcome concept", row=row_number)
    if not concepts:
        raise CohortIngestError(f"patient {patient_id} holds no concepts", row=row_number)

    return PatientRecord(patient_id=patient_id, concepts=concepts, outcomes=outcomes)


def load_cohort(path: Path, ontology: Ontology) -> List[PatientRecord]:
    """Read and validate all patient records.

    Raises:
        CohortIngestError: malformed JSON, unknown code, duplicate patient id,
            a patient without concepts or a file without patients
    """
    records: List[PatientRecord] = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for row_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise CohortIngestError(f"invalid JSON: {e}", row=row_number) from None
            record = parse_record(row, ontology, row_number)
            if record.patient_id in seen:
                raise CohortIngestError(f"duplicate patient_id {record.patient_id}", row=row_number)
            seen.add(record.patient_id)
            records.append(record)
    if not records:
        raise CohortIngestError(f"{path}: empty cohort")
    logger.debug(f"[Cohort] Loaded {len(records)} patients from {path}")
    return records


def write_cohort(records: Iterable[PatientRecord], path: Path) -> int:
    ordered = sorted(records, key=lambda r: r.patient_id)
    return write_jsonl(path, (r.to_row() for r in ordered))
