"""Exception hierarchy for patsim.

Undefined statistics (empty cells, p_e = 1, empty text) are not errors;
those functions return None. Exceptions here mark bad inputs or failed work.
"""
from typing import Any, Dict, List, Optional


class PatsimError(Exception):
    """Base class for all toolkit errors."""


# --- ontology ---------------------------------------------------------------

class OntologyStructureError(PatsimError):
    """Cycle, self-parent or duplicate code in a concept table."""

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        self.code = code


class OntologyResolutionError(PatsimError):
    """A parent id does not resolve to any concept."""

    def __init__(self, message: str, code: Optional[str] = None, parent: Optional[str] = None):
        super().__init__(message)
        self.code = code
        self.parent = parent


class ConceptLookupError(PatsimError, LookupError):
    """Code not present in the ontology."""


# --- cohort -----------------------------------------------------------------

class CohortIngestError(PatsimError):
    """Malformed patient record; carries the 1-based row number."""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


class DemographicError(PatsimError):
    """Patient without exactly one concept of a demographic kind."""

    def __init__(self, message: str, patient_id: Optional[str] = None):
        super().__init__(message)
        self.patient_id = patient_id


# --- profile generation -----------------------------------------------------

class ProfileGenerationError(PatsimError):
    """Generation failed; partial provenance is kept for the failure manifest."""

    def __init__(self, message: str, patient_index: Optional[int] = None,
                 provenance: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.patient_index = patient_index
        self.provenance = provenance or {}


class CohortSelectionError(PatsimError):
    """Requested cohort larger than the pool or unusable inputs."""


class SigmaBandError(PatsimError):
    """Degenerate binomial (p in {0, 1}) or invalid n."""


# --- persona ----------------------------------------------------------------

class PersonaDataError(PatsimError):
    """Profile data file missing, unreadable or missing required keys."""


class PromptAssemblyError(PatsimError):
    """Persona prompt could not be assembled (duplicate or malformed index)."""


# --- perturbation -----------------------------------------------------------

class NoReplacementError(PatsimError):
    """No candidate survived the hierarchy filter at any relaxation level."""

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        self.code = code


# --- orchestrator -----------------------------------------------------------

class SchemaParseError(PatsimError):
    """Simulator output is not a JSON object; the raw text is retained."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class SchemaValidationError(PatsimError):
    """Simulator output violates the turn schema.

    Attributes:
        violations: list of (kind, detail) pairs; kind is one of
            "missing_field", "dangling_index", "malformed_span"
        raw: the offending output
    """

    def __init__(self, violations: List[tuple], raw: str = ""):
        detail = "; ".join(f"{kind}: {msg}" for kind, msg in violations)
        super().__init__(f"schema violation: {detail}")
        self.violations = violations
        self.raw = raw

    @property
    def kinds(self) -> List[str]:
        return sorted({kind for kind, _ in self.violations})


class PortError(PatsimError):
    """Transport-level failure of a chat, SUT, embedding or classifier port."""


class DesignError(PatsimError):
    """Experiment design file is malformed."""


# --- agreement --------------------------------------------------------------

class AlignmentError(PatsimError):
    """Annotation sets do not cover the same item keys."""

    def __init__(self, message: str, only_a: Optional[list] = None, only_b: Optional[list] = None):
        super().__init__(message)
        self.only_a = only_a or []
        self.only_b = only_b or []


class AgreementError(PatsimError):
    """Inconsistent agreement inputs or internal invariant failure."""


class AnnotationFormatError(PatsimError):
    """Annotation file row that cannot be read."""


# --- reporting --------------------------------------------------------------

class ReportError(PatsimError):
    """Report inputs missing or inconsistent."""
