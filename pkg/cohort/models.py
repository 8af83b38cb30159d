"""Cohort data models."""
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, Field

from core.models import ConceptCode, DemographicKind


class OutcomeFlag(BaseModel):
    """Treatment with an outcome concept and whether the patient responded."""
    code: ConceptCode
    responded: bool


class PatientRecord(BaseModel):
    """One de-identified patient: concepts held plus treatment outcomes."""
    patient_id: str
    concepts: List[ConceptCode] = Field(min_length=1)
    outcomes: List[OutcomeFlag] = Field(default_factory=list)

    def outcome_map(self) -> Dict[ConceptCode, bool]:
        return {o.code: o.responded for o in self.outcomes}

    def to_row(self) -> dict:
        """Compact JSONL row with qualified codes."""
        return {
            "patient_id": self.patient_id,
            "concepts": sorted(c.qualified for c in self.concepts),
            "outcomes": {o.code.qualified: o.responded for o in sorted(self.outcomes, key=lambda o: o.code)},
        }


class CategoricalDistribution(BaseModel):
    """Empirical distribution over demographic categories, sorted by code."""
    kind: DemographicKind
    categories: List[ConceptCode]
    counts: List[int]

    @property
    def probabilities(self) -> np.ndarray:
        counts = np.asarray(self.counts, dtype=float)
        return counts / counts.sum()

    def as_dict(self) -> Dict[ConceptCode, float]:
        return dict(zip(self.categories, (float(p) for p in self.probabilities)))

    def sample(self, rng: np.random.Generator) -> ConceptCode:
        index = rng.choice(len(self.categories), p=self.probabilities)
        return self.categories[int(index)]
