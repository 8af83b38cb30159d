"""Two-phase medical profile generator (Phase 1: construction).

Stages per profile:
  1. candidate predictors V = top-k features by outcome association
  2. sample gender and age bin from the cohort's empirical distributions
  3. scan V in seeded random order, admitting through the RR band gate
  4. scan the residual features R in seeded random order against the fixed
     post-stage-3 set, admitting through the diversity gate, at most
     max_residual_additions times

Every profile uses its own generator seeded with rng_seed + patient_index,
so a batch is reproducible independent of worker scheduling.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from cohort import CategoricalDistribution, CohortStats, demographic_distribution, rank_top_k_predictors
from core.errors import ProfileGenerationError
from core.models import (
    FEATURE_VOCABULARIES,
    SECTION_ORDER,
    VOCABULARY_SECTIONS,
    ConceptCode,
    DemographicKind,
    GateRecord,
    MedicalFact,
    MedicalProfile,
    ProfileSection,
    format_index,
)

from .gate import band_gate, diversity_gate
from .models import GenConfig, GenerationFailure, GenerationResult
from .predictor import LogOddsPredictor, ResponsePredictor

logger = logging.getLogger("patsim.profilegen")


class GenerationContext:
    """Per-batch precomputation shared by all profiles of one outcome."""

    def __init__(
        self,
        cohort: CohortStats,
        cfg: GenConfig,
        predictor: Optional[ResponsePredictor] = None,
    ):
        self.cohort = cohort
        self.cfg = cfg
        self.predictor = predictor or LogOddsPredictor(cohort)
        self.candidates: List[ConceptCode] = rank_top_k_predictors(cohort, cfg.outcome, cfg.top_k)
        candidate_set = set(self.candidates)
        self.residual: List[ConceptCode] = [
            c for c in cohort.concepts()
            if c.vocabulary in FEATURE_VOCABULARIES and c not in candidate_set
        ]
        self.gender: CategoricalDistribution = demographic_distribution(
            cohort.records, DemographicKind.GENDER, cohort.ontology
        )
        self.age: CategoricalDistribution = demographic_distribution(
            cohort.records, DemographicKind.AGE_BIN, cohort.ontology
        )


def profile_id_for(outcome: ConceptCode, patient_index: int) -> str:
    return f"{outcome.id}-{patient_index:05d}"


def generate_profile(
    cohort: CohortStats,
    cfg: GenConfig,
    patient_index: int,
    context: Optional[GenerationContext] = None,
) -> MedicalProfile:
    """Generate one profile with full admission provenance.

    Raises:
        ProfileGenerationError: predictor failure or invalid assembly; the
            error carries the partial provenance built so far
    """
    ctx = context or GenerationContext(cohort, cfg)
    ontology = cohort.ontology
    seed = cfg.rng_seed + patient_index
    rng = np.random.default_rng(seed)

    # Stage 2
    age = ctx.age.sample(rng)
    gender = ctx.gender.sample(rng)
    selected: List[ConceptCode] = [age, gender]
    stages: Dict[ConceptCode, int] = {age: 2, gender: 2}
    gates: Dict[ConceptCode, GateRecord] = {}
    rejections: List[GateRecord] = []

    # Stage 3
    for j in rng.permutation(len(ctx.candidates)):
        candidate = ctx.candidates[int(j)]
        if candidate in stages:
            continue
        record = band_gate(
            cohort, selected, candidate, cfg.outcome,
            low=cfg.rr_low, high=cfg.rr_high, strict=cfg.strict_pair_gate, stage=3,
        )
        if record.passed:
            selected.append(candidate)
            stages[candidate] = 3
            gates[candidate] = record
        else:
            rejections.append(record)

    # Stage 4 tests against the frozen intermediate set
    intermediate = tuple(selected)
    additions = 0
    for j in rng.permutation(len(ctx.residual)):
        if additions >= cfg.max_residual_additions:
            break
        candidate = ctx.residual[int(j)]
        if candidate in stages:
            continue
        record = diversity_gate(cohort, intermediate, candidate, cfg.outcome, cfg.diversity_threshold, stage=4)
        if record.passed:
            selected.append(candidate)
            stages[candidate] = 4
            gates[candidate] = record
            additions += 1
        else:
            rejections.append(record)

    partial = {
        "seed": seed,
        "selected": [c.qualified for c in selected],
        "rejections": len(rejections),
    }
    try:
        predicted = float(ctx.predictor.predict(selected, cfg.outcome))
    except Exception as e:
        raise ProfileGenerationError(
            f"predictor '{ctx.predictor.name}' failed for index {patient_index}: {e}",
            patient_index=patient_index,
            provenance=partial,
        ) from e

    try:
        return MedicalProfile(
            profile_id=profile_id_for(cfg.outcome, patient_index),
            outcome=cfg.outcome,
            seed=seed,
            predicted_response=predicted,
            sections=build_sections(ontology, selected, stages, gates),
            rejections=rejections,
        )
    except ValueError as e:
        raise ProfileGenerationError(
            f"invalid profile for index {patient_index}: {e}",
            patient_index=patient_index,
            provenance=partial,
        ) from e


def build_sections(
    ontology,
    selected: Sequence[ConceptCode],
    stages: Dict[ConceptCode, int],
    gates: Dict[ConceptCode, GateRecord],
) -> List[ProfileSection]:
    """Group admitted concepts into densely numbered sections.

    Demographics list age before gender; other sections keep admission order.
    Empty sections are dropped before numbering.
    """
    buckets: Dict = {name: [] for name in SECTION_ORDER}
    for code in selected:
        buckets[VOCABULARY_SECTIONS[code.vocabulary]].append(code)

    kind_order = {DemographicKind.AGE_BIN: 0, DemographicKind.GENDER: 1}
    sections = []
    number = 0
    for name in SECTION_ORDER:
        codes = buckets[name]
        if not codes:
            continue
        if name == SECTION_ORDER[0]:
            codes = sorted(codes, key=lambda c: kind_order.get(ontology.demographic_kind(c), 2))
        number += 1
        facts = [
            MedicalFact(
                index=format_index(number, item),
                code=code,
                text=ontology.fact_text(code),
                stage=stages[code],
                demographic=ontology.demographic_kind(code),
                gate=gates.get(code),
            )
            for item, code in enumerate(codes, start=1)
        ]
        sections.append(ProfileSection(name=name, number=number, facts=facts))
    return sections


def generate_profiles(
    cohort: CohortStats,
    cfg: GenConfig,
    count: int,
    start_index: int = 0,
    workers: int = 1,
    predictor: Optional[ResponsePredictor] = None,
    show_progress: bool = True,
) -> GenerationResult:
    """Generate a batch; failures go to the result's failure manifest.

    Profiles come back ordered by patient index whatever the worker count.
    """
    context = GenerationContext(cohort, cfg, predictor)
    logger.debug(
        f"[Generate] outcome={cfg.outcome} candidates={len(context.candidates)} residual={len(context.residual)}"
    )
    indices = list(range(start_index, start_index + count))
    profiles: Dict[int, MedicalProfile] = {}
    failures: List[GenerationFailure] = []

    def record_failure(index: int, error: Exception) -> None:
        provenance = getattr(error, "provenance", {}) or {}
        failures.append(GenerationFailure(patient_index=index, error=str(error), provenance=provenance))
        logger.warning(f"[Generate] profile {index} failed: {error}")

    if workers <= 1:
        iterator = tqdm(indices, desc="Generating", unit="profile") if show_progress else indices
        for index in iterator:
            try:
                profiles[index] = generate_profile(cohort, cfg, index, context)
            except ProfileGenerationError as e:
                record_failure(index, e)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_index = {
                executor.submit(generate_profile, cohort, cfg, index, context): index
                for index in indices
            }
            pbar = tqdm(total=len(indices), desc="Generating", unit="profile") if show_progress else None
            for future in as_completed(future_to_index):
                index = future_to_index[future]
                try:
                    profiles[index] = future.result()
                except ProfileGenerationError as e:
                    record_failure(index, e)
                if pbar:
                    pbar.update(1)
            if pbar:
                pbar.close()

    return GenerationResult(
        profiles=[profiles[i] for i in sorted(profiles)],
        failures=sorted(failures, key=lambda f: f.patient_index),
    )
