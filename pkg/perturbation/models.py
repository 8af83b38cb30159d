"""Perturbation plan and ground-truth record models."""
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from config import Defaults
from core.models import ConceptCode, MedicalProfile


class RelaxationStep(str, Enum):
    """Fallback applied when no candidate survives the filter."""
    EXPAND_POOL = "expand_pool"
    LOWER_DISTANCE = "lower_distance"


class PerturbationPlan(BaseModel):
    """How replacements are drawn for one batch of profiles."""
    target_fraction: float = Field(default=Defaults.PERTURB_FRACTION, gt=0, le=1)
    profile_fraction: float = Field(default=Defaults.PERTURB_PROFILE_FRACTION, ge=0, le=1)
    candidate_pool_size: int = Field(default=Defaults.CANDIDATE_POOL_SIZE, ge=1)
    min_distance: int = Field(default=Defaults.MIN_DISTANCE, ge=1)
    min_relaxed_distance: int = Field(default=Defaults.MIN_RELAXED_DISTANCE, ge=1)
    pool_expansion: int = Field(default=Defaults.POOL_EXPANSION, ge=1)
    seed: int = Defaults.SEED
    relaxation_policy: List[RelaxationStep] = Field(
        default_factory=lambda: [RelaxationStep.EXPAND_POOL, RelaxationStep.LOWER_DISTANCE]
    )

    @field_validator("relaxation_policy")
    @classmethod
    def _no_repeats(cls, steps: List[RelaxationStep]) -> List[RelaxationStep]:
        if len(set(steps)) != len(steps):
            raise ValueError("relaxation steps may appear once each")
        return steps

    def levels(self) -> List[Tuple[int, int]]:
        """(pool size, min distance) per relaxation level, level 0 first.

        EXPAND_POOL multiplies the pool once; LOWER_DISTANCE lowers the
        distance one step at a time down to min_relaxed_distance.
        """
        pool, distance = self.candidate_pool_size, self.min_distance
        levels = [(pool, distance)]
        for step in self.relaxation_policy:
            if step == RelaxationStep.EXPAND_POOL and self.pool_expansion > 1:
                pool *= self.pool_expansion
                levels.append((pool, distance))
            elif step == RelaxationStep.LOWER_DISTANCE:
                while distance > self.min_relaxed_distance:
                    distance -= 1
                    levels.append((pool, distance))
        return levels

    @classmethod
    def from_settings(cls, perturbation, seed: int) -> "PerturbationPlan":
        """Build from a config.settings.PerturbationSettings section."""
        return cls(
            target_fraction=perturbation.target_fraction,
            profile_fraction=perturbation.profile_fraction,
            candidate_pool_size=perturbation.candidate_pool_size,
            min_distance=perturbation.min_distance,
            min_relaxed_distance=perturbation.min_relaxed_distance,
            pool_expansion=perturbation.pool_expansion,
            seed=seed,
        )


class PerturbationRecord(BaseModel):
    """Ground truth for one replaced fact.

    distance is None when original and replacement are not connected in the
    is-a graph. pool lists the candidate codes in similarity order at the
    recorded level, so the choice can be audited by re-running retrieval.
    """
    profile_id: str = ""
    index: str = ""
    original: ConceptCode
    replacement: ConceptCode
    original_text: str = ""
    replacement_text: str = ""
    similarity_rank: int
    similarity: float
    distance: Optional[int] = None
    relaxation_level: int = 0
    pool_size: int
    min_distance: int
    pool: List[ConceptCode] = Field(default_factory=list)

    def model_dump(self, **kwargs) -> dict:
        """Override to exclude None values by default."""
        kwargs.setdefault('exclude_none', True)
        return super().model_dump(**kwargs)


class PerturbationFailure(BaseModel):
    profile_id: str
    error: str


class PerturbationResult(BaseModel):
    """Batch outcome: every input profile, perturbed or not, plus ground truth."""
    profiles: List[MedicalProfile] = Field(default_factory=list)
    records: List[PerturbationRecord] = Field(default_factory=list)
    failures: List[PerturbationFailure] = Field(default_factory=list)

    @property
    def perturbed_ids(self) -> List[str]:
        return [p.profile_id for p in self.profiles if p.perturbed]
