"""Experiment designs and the batch conversation runner.

A design is a list of settings; each setting is a cross product of
linguistic profiles, behavioral profiles and a profile selection. Settings
may overlap: a (profile, linguistic, behavioral, replicate) combination is
simulated once and credited to every setting that asks for it.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import yaml
from tqdm import tqdm

from core.errors import DesignError, PatsimError
from core.models import MedicalProfile
from core.utils import read_json, stable_seed, write_json
from persona import (
    OPERATIONAL_BEHAVIORAL,
    OPERATIONAL_LINGUISTIC,
    BehavioralName,
    LinguisticName,
    PersonaPromptSpec,
    load_behavioral,
    load_linguistic,
)
from plugins.ports.base import ChatPort, SutPort

from .engine import run_conversation, write_conversation_log
from .models import (
    ConversationLimits,
    ConversationStatus,
    DesignSetting,
    ExperimentDesign,
    ExperimentManifest,
    ManifestCell,
    ManifestEntry,
    PlannedConversation,
    ProfileSelector,
)

logger = logging.getLogger("patsim.orchestrator")

TOOLKIT_VERSION = "1.0.0"

FULL_PROFILES = 60
INTERSECTION_PROFILES = 10

# Builds the (chat, sut) pair for one conversation
PortFactory = Callable[[PersonaPromptSpec, PlannedConversation], Tuple[ChatPort, SutPort]]


def full_design(n_profiles: int = FULL_PROFILES, n_intersection: int = INTERSECTION_PROFILES) -> ExperimentDesign:
    """Linguistic variation, behavioral variation and their intersection.

    With 60 profiles and a 10-profile intersection this yields
    300 + 180 + 150 planned conversations, 500 after deduplication.
    """
    linguistic = [n.value for n in OPERATIONAL_LINGUISTIC]
    behavioral = [n.value for n in OPERATIONAL_BEHAVIORAL]
    return ExperimentDesign(
        design_id="full",
        settings=[
            DesignSetting(
                name="linguistic_variation",
                linguistic=linguistic,
                behavioral=[BehavioralName.STRUCTURED_COOPERATIVE.value],
                profiles=ProfileSelector(first=n_profiles),
            ),
            DesignSetting(
                name="behavioral_variation",
                linguistic=[LinguisticName.FUNCTIONAL_HL.value],
                behavioral=behavioral,
                profiles=ProfileSelector(first=n_profiles),
            ),
            DesignSetting(
                name="intersection",
                linguistic=linguistic,
                behavioral=behavioral,
                profiles=ProfileSelector(first=n_intersection),
            ),
        ],
    )


def load_design(path: Path) -> ExperimentDesign:
    """Read a YAML design file.

    Raises:
        DesignError: unreadable file, bad structure or unknown profile names
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        design = ExperimentDesign.model_validate(data)
    except (OSError, yaml.YAMLError, ValueError) as e:
        raise DesignError(f"cannot load design {path}: {e}") from e
    validate_design(design)
    return design


def validate_design(design: ExperimentDesign) -> None:
    if not design.settings:
        raise DesignError(f"design '{design.design_id}' has no settings")
    for setting in design.settings:
        if not setting.linguistic or not setting.behavioral:
            raise DesignError(f"setting '{setting.name}' needs at least one linguistic and one behavioral profile")
        for name in setting.linguistic:
            if name not in {n.value for n in LinguisticName}:
                raise DesignError(f"setting '{setting.name}': unknown linguistic profile '{name}'")
        for name in setting.behavioral:
            if name not in {n.value for n in BehavioralName}:
                raise DesignError(f"setting '{setting.name}': unknown behavioral profile '{name}'")


def save_design(design: ExperimentDesign, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(design.model_dump(mode="json", exclude_none=True), f, sort_keys=False)
    return path


def select_setting_profiles(selector: ProfileSelector, profiles: Sequence[MedicalProfile]) -> List[MedicalProfile]:
    """Apply a selector to the pool, keeping pool order.

    Raises:
        DesignError: unknown id or more profiles requested than available
    """
    if selector.ids is not None:
        by_id = {p.profile_id: p for p in profiles}
        missing = [pid for pid in selector.ids if pid not in by_id]
        if missing:
            raise DesignError(f"design references unknown profiles: {', '.join(missing)}")
        return [by_id[pid] for pid in selector.ids]
    if selector.first is None:
        return list(profiles)
    if selector.first > len(profiles):
        raise DesignError(f"design asks for {selector.first} profiles, only {len(profiles)} available")
    return list(profiles[:selector.first])


def conversation_id_for(profile_id: str, linguistic: str, behavioral: str, replicate: int, replicates: int) -> str:
    base = f"{profile_id}__{linguistic}__{behavioral}"
    return f"{base}__r{replicate}" if replicates > 1 else base


def plan_conversations(
    design: ExperimentDesign,
    profiles: Sequence[MedicalProfile],
    seed: int,
) -> Tuple[List[PlannedConversation], Dict[str, int]]:
    """Deduplicated conversation plan plus the planned count per setting.

    Conversation order is the order of first appearance across settings.
    """
    validate_design(design)
    planned: Dict[str, PlannedConversation] = {}
    per_setting: Dict[str, int] = {}
    for setting in design.settings:
        chosen = select_setting_profiles(setting.profiles, profiles)
        count = 0
        for profile in chosen:
            for linguistic in setting.linguistic:
                for behavioral in setting.behavioral:
                    for replicate in range(design.replicates):
                        count += 1
                        cid = conversation_id_for(profile.profile_id, linguistic, behavioral, replicate, design.replicates)
                        entry = planned.get(cid)
                        if entry is None:
                            entry = PlannedConversation(
                                conversation_id=cid,
                                profile_id=profile.profile_id,
                                linguistic=linguistic,
                                behavioral=behavioral,
                                replicate=replicate,
                                seed=stable_seed(seed, cid),
                            )
                            planned[cid] = entry
                        if setting.name not in entry.settings:
                            entry.settings.append(setting.name)
        per_setting[setting.name] = count
    return list(planned.values()), per_setting


def persona_for(profile: MedicalProfile, plan: PlannedConversation) -> PersonaPromptSpec:
    return PersonaPromptSpec(
        medical=profile,
        linguistic=load_linguistic(plan.linguistic),
        behavioral=load_behavioral(plan.behavioral),
    )


def run_experiment(
    design: ExperimentDesign,
    profiles: Sequence[MedicalProfile],
    port_factory: PortFactory,
    limits: ConversationLimits,
    out_dir: Path,
    seed: int,
    workers: int = 1,
    mode: str = "stub",
    stage_wording: str = "",
    show_progress: bool = True,
) -> ExperimentManifest:
    """Run every planned conversation and write logs plus manifest.json.

    A conversation that raises is recorded as failed in the manifest; the
    manifest is written in every case.
    """
    out_dir = Path(out_dir)
    log_dir = out_dir / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    by_id = {p.profile_id: p for p in profiles}
    plan, per_setting = plan_conversations(design, profiles, seed)
    logger.info(f"[Experiment] {design.design_id}: {sum(per_setting.values())} planned, {len(plan)} unique")

    def run_one(item: PlannedConversation) -> ManifestEntry:
        entry = ManifestEntry(
            conversation_id=item.conversation_id,
            profile_id=item.profile_id,
            linguistic=item.linguistic,
            behavioral=item.behavioral,
            settings=item.settings,
            status=ConversationStatus.FAILED,
        )
        try:
            persona = persona_for(by_id[item.profile_id], item)
            chat, sut = port_factory(persona, item)
            conversation = run_conversation(
                persona, chat, sut, limits,
                conversation_id=item.conversation_id,
                seed=item.seed,
                stage_wording=stage_wording,
            )
        except PatsimError as e:
            entry.error = str(e)
            logger.warning(f"[Experiment] {item.conversation_id} failed: {e}")
            return entry
        log_path = log_dir / f"{item.conversation_id}.jsonl"
        write_conversation_log(conversation, log_path)
        entry.log = str(log_path.relative_to(out_dir))
        entry.status = conversation.status
        entry.abort_reason = conversation.abort_reason
        entry.error = conversation.error
        return entry

    entries: Dict[str, ManifestEntry] = {}
    if workers <= 1:
        iterator = tqdm(plan, desc="Simulating", unit="conv") if show_progress else plan
        for item in iterator:
            entries[item.conversation_id] = run_one(item)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_id = {executor.submit(run_one, item): item.conversation_id for item in plan}
            pbar = tqdm(total=len(plan), desc="Simulating", unit="conv") if show_progress else None
            for future in as_completed(future_to_id):
                entries[future_to_id[future]] = future.result()
                if pbar:
                    pbar.update(1)
            if pbar:
                pbar.close()

    manifest = build_manifest(design, [entries[item.conversation_id] for item in plan], per_setting, seed, mode)
    write_json(out_dir / "manifest.json", manifest.model_dump(mode="json"))
    return manifest


def build_manifest(
    design: ExperimentDesign,
    entries: List[ManifestEntry],
    per_setting: Dict[str, int],
    seed: int,
    mode: str,
) -> ExperimentManifest:
    cells: Dict[Tuple[str, str], ManifestCell] = {}
    for entry in sorted(entries, key=lambda e: e.conversation_id):
        key = (entry.linguistic, entry.behavioral)
        cell = cells.setdefault(key, ManifestCell(linguistic=entry.linguistic, behavioral=entry.behavioral))
        cell.count += 1
        if entry.profile_id not in cell.profile_ids:
            cell.profile_ids.append(entry.profile_id)
        if entry.log:
            cell.logs.append(entry.log)
        if entry.status == ConversationStatus.FAILED:
            cell.failed += 1
    return ExperimentManifest(
        design_id=design.design_id,
        seed=seed,
        toolkit_version=TOOLKIT_VERSION,
        mode=mode,
        settings=per_setting,
        cells=[cells[k] for k in sorted(cells)],
        conversations=sorted(entries, key=lambda e: e.conversation_id),
    )


def load_manifest(path: Path) -> ExperimentManifest:
    return ExperimentManifest.model_validate(read_json(path))
