"""Profile generation configuration and result models."""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from config import Defaults
from core.errors import SigmaBandError
from core.models import ConceptCode, MedicalProfile


class GenConfig(BaseModel):
    """Parameters of the two-phase generator for one outcome."""
    outcome: ConceptCode
    top_k: int = Field(default=Defaults.TOP_K, ge=1)
    rr_high: float = Field(default=Defaults.RR_HIGH)
    rr_low: float = Field(default=Defaults.RR_LOW)
    diversity_threshold: float = Field(default=Defaults.DIVERSITY_THRESHOLD, gt=1)
    max_residual_additions: int = Field(default=Defaults.MAX_RESIDUAL_ADDITIONS, ge=0)
    rng_seed: int = Field(default=Defaults.SEED)
    strict_pair_gate: bool = False

    @model_validator(mode="after")
    def _check_band(self) -> "GenConfig":
        if not 0 < self.rr_low < 1 < self.rr_high:
            raise ValueError(f"gate band needs 0 < rr_low < 1 < rr_high, got ({self.rr_low}, {self.rr_high}]")
        return self

    @classmethod
    def from_settings(cls, generation, outcome: ConceptCode, seed: int) -> "GenConfig":
        """Build from a config.settings.GenerationConfig section."""
        return cls(
            outcome=outcome,
            top_k=generation.top_k,
            rr_high=generation.rr_high,
            rr_low=generation.rr_low,
            diversity_threshold=generation.diversity_threshold,
            max_residual_additions=generation.max_residual_additions,
            rng_seed=seed,
            strict_pair_gate=generation.strict_pair_gate,
        )


class GenerationFailure(BaseModel):
    """Failure manifest entry for one patient index."""
    patient_index: int
    error: str
    provenance: Dict[str, Any] = Field(default_factory=dict)


class GenerationResult(BaseModel):
    """Batch generation outcome."""
    profiles: List[MedicalProfile] = Field(default_factory=list)
    failures: List[GenerationFailure] = Field(default_factory=list)

    @property
    def success(self) -> bool:
        return not self.failures


class SigmaBand(BaseModel):
    """One of the seven binomial bands: counts lo..hi inclusive (empty when lo > hi)."""
    index: int
    label: str
    lo: int
    hi: int
    mass: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def contains(self, k: int) -> bool:
        return self.lo <= k <= self.hi


class SigmaBandPlan(BaseModel):
    """Binomial(n, p) split at floor(mu + j*sigma), j = ±1, ±2, ±3."""
    n: int
    p: float
    mu: float
    sigma: float
    bands: List[SigmaBand]

    @property
    def central(self) -> SigmaBand:
        return self.bands[len(self.bands) // 2]

    def masses(self) -> List[float]:
        return [band.mass for band in self.bands]

    def band_of(self, k: int) -> int:
        for band in self.bands:
            if band.contains(k):
                return band.index
        raise SigmaBandError(f"count {k} outside 0..{self.n}")


class BandAllocation(BaseModel):
    """Per-band bookkeeping of a cohort selection."""
    band: SigmaBand
    available: int
    quota: int
    selected: int
    profile_ids: List[str] = Field(default_factory=list)


class SelectionReport(BaseModel):
    n: int
    population_rate: float
    allocations: List[BandAllocation] = Field(default_factory=list)
    predicted_rate: Optional[float] = None
