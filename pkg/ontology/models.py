"""Ontology data models."""
from dataclasses import dataclass, field
from typing import Tuple

from core.models import ConceptCode


@dataclass(frozen=True)
class Concept:
    """One row of the concept table."""
    code: ConceptCode
    display_name: str
    parent_ids: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def id(self) -> str:
        return self.code.id

    @property
    def vocabulary(self):
        return self.code.vocabulary


@dataclass(frozen=True)
class TermMatch:
    """A lexicon match over token offsets [start, end)."""
    start: int
    end: int
    code: ConceptCode
    term: str
