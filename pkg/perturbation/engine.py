"""Controlled error injection into medical profiles.

A fact's concept is swapped for a semantically close but clinically distinct
concept: the nearest display-name neighbours are shuffled under the plan
seed and scanned for the first one that is neither an ancestor nor a
descendant of the original and lies at least min_distance is-a edges away.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from core.errors import NoReplacementError
from core.models import ConceptCode, MedicalFact, MedicalProfile, ProfileSection
from core.utils import stable_seed
from ontology import Ontology, similarity_index

from .models import PerturbationFailure, PerturbationPlan, PerturbationRecord, PerturbationResult

logger = logging.getLogger("patsim.perturbation")


def shuffle_order(plan: PerturbationPlan, code: ConceptCode, level: int, size: int) -> np.ndarray:
    """Scan order over a candidate pool of the given size."""
    rng = np.random.default_rng(stable_seed(plan.seed, code.qualified, level))
    return rng.permutation(size)


def passes_filter(ontology: Ontology, original: ConceptCode, candidate: ConceptCode, min_distance: int) -> bool:
    if candidate == original or ontology.is_ancestor_or_descendant(original, candidate):
        return False
    return ontology.hierarchical_distance(original, candidate) >= min_distance


def select_perturbation(
    ontology: Ontology,
    embedder,
    code: ConceptCode,
    plan: PerturbationPlan,
    exclude: FrozenSet[ConceptCode] = frozenset(),
) -> PerturbationRecord:
    """Pick the replacement for one concept.

    Args:
        exclude: Codes that may not be chosen (e.g. already in the profile)

    Raises:
        ConceptLookupError: code not in the ontology
        NoReplacementError: no survivor at any relaxation level
    """
    ontology.get(code)
    index = similarity_index(ontology, embedder)

    for level, (pool_size, min_distance) in enumerate(plan.levels()):
        pool = index.nearest(code, pool_size)
        for position in shuffle_order(plan, code, level, len(pool)):
            candidate, score = pool[position]
            if candidate in exclude or not passes_filter(ontology, code, candidate, min_distance):
                continue
            distance = ontology.hierarchical_distance(code, candidate)
            if level:
                logger.debug(f"[Perturb] {code} needed relaxation level {level} (pool={pool_size}, d>={min_distance})")
            return PerturbationRecord(
                original=code,
                replacement=candidate,
                original_text=ontology.fact_text(code),
                replacement_text=ontology.fact_text(candidate),
                similarity_rank=int(position) + 1,
                similarity=round(score, 6),
                distance=None if math.isinf(distance) else int(distance),
                relaxation_level=level,
                pool_size=pool_size,
                min_distance=min_distance,
                pool=[c for c, _ in pool],
            )

    raise NoReplacementError(f"no replacement for {code} after {len(plan.levels())} levels", code=code.qualified)


def perturbation_count(plan: PerturbationPlan, eligible: int) -> int:
    """ceil(target_fraction * eligible), robust to float noise."""
    return math.ceil(round(plan.target_fraction * eligible, 9))


def perturb_profile(
    profile: MedicalProfile,
    ontology: Ontology,
    embedder,
    plan: PerturbationPlan,
) -> Tuple[MedicalProfile, List[PerturbationRecord]]:
    """Replace ceil(target_fraction * n) non-demographic facts.

    Facts are tried in a seeded uniform order; a fact without a replacement
    is skipped in favour of the next one. Indices, stages and demographics
    are untouched. The returned profile keeps the id and is flagged
    perturbed.

    Raises:
        NoReplacementError: fewer than the required facts could be replaced
    """
    eligible = [fact for fact in profile.facts() if fact.demographic is None]
    target = perturbation_count(plan, len(eligible))
    if target == 0:
        return profile, []

    rng = np.random.default_rng(stable_seed(plan.seed, profile.profile_id))
    taken = set(profile.concept_set())
    chosen: Dict[str, PerturbationRecord] = {}
    for position in rng.permutation(len(eligible)):
        fact = eligible[position]
        try:
            record = select_perturbation(ontology, embedder, fact.code, plan, exclude=frozenset(taken))
        except NoReplacementError as e:
            logger.debug(f"[Perturb] {profile.profile_id} [{fact.index}] skipped: {e}")
            continue
        taken.add(record.replacement)
        chosen[fact.index] = record.model_copy(update={"profile_id": profile.profile_id, "index": fact.index})
        if len(chosen) == target:
            break

    if len(chosen) < target:
        raise NoReplacementError(
            f"profile {profile.profile_id}: replaced {len(chosen)} of {target} required facts"
        )

    sections = [
        ProfileSection(
            name=section.name,
            number=section.number,
            facts=[_replaced(fact, chosen.get(fact.index)) for fact in section.facts],
        )
        for section in profile.sections
    ]
    perturbed = MedicalProfile(
        profile_id=profile.profile_id,
        outcome=profile.outcome,
        seed=profile.seed,
        predicted_response=profile.predicted_response,
        sections=sections,
        rejections=profile.rejections,
        perturbed=True,
    )
    order = {fact.index: i for i, fact in enumerate(profile.facts())}
    records = sorted(chosen.values(), key=lambda r: order[r.index])
    return perturbed, records


def _replaced(fact: MedicalFact, record: Optional[PerturbationRecord]) -> MedicalFact:
    if record is None:
        return fact
    return fact.model_copy(update={"code": record.replacement, "text": record.replacement_text, "gate": None})


def select_profiles(profiles: Sequence[MedicalProfile], plan: PerturbationPlan) -> List[str]:
    """Ids of the profiles to perturb: ceil(profile_fraction * n), seeded."""
    count = math.ceil(round(plan.profile_fraction * len(profiles), 9))
    if count >= len(profiles):
        return [p.profile_id for p in profiles]
    rng = np.random.default_rng(stable_seed(plan.seed, "profiles"))
    picked = sorted(rng.choice(len(profiles), size=count, replace=False))
    return [profiles[i].profile_id for i in picked]


def perturb_profiles(
    profiles: Iterable[MedicalProfile],
    ontology: Ontology,
    embedder,
    plan: PerturbationPlan,
    workers: int = 1,
    show_progress: bool = True,
) -> PerturbationResult:
    """Perturb the selected subset of a batch.

    Every input profile appears in the result, in input order; profiles
    that could not be perturbed stay unchanged and go to the failure list.
    """
    profiles = list(profiles)
    selected = set(select_profiles(profiles, plan))
    outputs: Dict[str, Tuple[MedicalProfile, List[PerturbationRecord]]] = {}
    failures: List[PerturbationFailure] = []
    targets = [p for p in profiles if p.profile_id in selected]

    def record_failure(profile: MedicalProfile, error: Exception) -> None:
        failures.append(PerturbationFailure(profile_id=profile.profile_id, error=str(error)))
        logger.warning(f"[Perturb] {profile.profile_id} left unperturbed: {error}")

    if workers <= 1:
        iterator = tqdm(targets, desc="Perturbing", unit="profile") if show_progress else targets
        for profile in iterator:
            try:
                outputs[profile.profile_id] = perturb_profile(profile, ontology, embedder, plan)
            except NoReplacementError as e:
                record_failure(profile, e)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_profile = {
                executor.submit(perturb_profile, profile, ontology, embedder, plan): profile
                for profile in targets
            }
            pbar = tqdm(total=len(targets), desc="Perturbing", unit="profile") if show_progress else None
            for future in as_completed(future_to_profile):
                profile = future_to_profile[future]
                try:
                    outputs[profile.profile_id] = future.result()
                except NoReplacementError as e:
                    record_failure(profile, e)
                if pbar:
                    pbar.update(1)
            if pbar:
                pbar.close()

    result = PerturbationResult()
    for profile in profiles:
        if profile.profile_id in outputs:
            perturbed, records = outputs[profile.profile_id]
            result.profiles.append(perturbed)
            result.records.extend(records)
        else:
            result.profiles.append(profile)
    result.failures = sorted(failures, key=lambda f: f.profile_id)
    logger.info(
        f"[Perturb] {len(result.perturbed_ids)}/{len(profiles)} profiles perturbed, {len(result.records)} facts replaced"
    )
    return result
