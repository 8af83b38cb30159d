"""LLM-judge annotation and simulated annotators.

The judge sees the reference profile, one patient utterance and the fact
indices the utterance cites, and answers with a JSON object:

    {"labels": {"2.1": "ACCURATE", ...}, "free_mentions": ["..."]}
"""
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from tqdm import tqdm

from core.errors import AgreementError, PortError
from core.models import MedicalProfile
from core.utils import get_slug, stable_seed
from orchestrator.models import Conversation
from plugins.ports.base import ChatMessage, ChatPort, guard
from plugins.ports.stub_judge import AnswerKeyJudge

from .models import (
    FREE_PREFIX,
    LABEL_ORDER,
    PROFILE_KEYS,
    AnnotationItem,
    AnnotationSet,
    AnnotationStatus,
    JudgeFailure,
    is_profile_key,
)

logger = logging.getLogger("patsim.agreement")

REQUIRED_SLOTS = ("{profile_id}", "{profile}", "{turn}", "{utterance}", "{items}")

_FENCE = re.compile(r"^\s*```(?:json)?\s*(.*?)\s*```\s*$", re.DOTALL)


def rubric() -> str:
    """The three-label annotation schema."""
    return (
        "Label each cited fact of the patient's utterance against the reference profile:\n"
        "- ACCURATE: the utterance states the fact consistently with the profile.\n"
        "- INACCURATE: the utterance contradicts or alters the profile's fact.\n"
        "- UNSUPPORTED: the statement is fabricated, speculative, or unrelated to the profile."
    )


def judge_system_prompt() -> str:
    return (
        "You are a clinical annotator checking a simulated patient's statements "
        "against their medical record. Answer with one JSON object only."
    )


DEFAULT_TEMPLATE = """{rubric}

Reference profile:
{profile}

PROFILE_ID: {profile_id}
TURN: {turn}
Patient utterance:
{utterance}

ITEMS: {items}

Answer format:
{{"labels": {{"<index>": "ACCURATE|INACCURATE|UNSUPPORTED"}}, "free_mentions": ["<medical statement not tied to an index>"]}}
"""


def load_template(path: Optional[Path] = None) -> str:
    """Judge template from a file, or the built-in one.

    A template must keep the PROFILE_ID and ITEMS lines machine-readable and
    contain every slot in REQUIRED_SLOTS; literal braces are doubled.
    """
    if path is None:
        return DEFAULT_TEMPLATE
    path = Path(path)
    if not path.exists():
        raise AgreementError(f"judge template not found: {path}")
    template = path.read_text(encoding="utf-8")
    missing = [slot for slot in REQUIRED_SLOTS if slot not in template]
    if missing:
        raise AgreementError(f"judge template {path} lacks slots {missing}")
    return template


def render_profile(profile: MedicalProfile) -> str:
    return "\n".join(fact.tagged() for fact in profile.facts())


def render_judge_prompt(template: str, profile: MedicalProfile, turn: int, utterance: str, items: Sequence[str]) -> str:
    return template.format(
        rubric=rubric(),
        profile=render_profile(profile),
        profile_id=profile.profile_id,
        turn=turn,
        utterance=utterance,
        items=json.dumps(list(items)),
    )


def parse_judge_reply(raw: str, items: Sequence[str]) -> Tuple[Dict[str, Optional[str]], List[str]]:
    """Labels per requested item (None = abstain) and free-mention texts.

    Unparseable replies abstain on every item; a reply that omits an item
    or gives an unknown label abstains on that item only.
    """
    labels: Dict[str, Optional[str]] = {index: None for index in items}
    match = _FENCE.match(raw or "")
    text = match.group(1) if match else (raw or "")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError:
        return labels, []
    if not isinstance(payload, dict) or not isinstance(payload.get("labels"), dict):
        return labels, []
    for index in items:
        value = payload["labels"].get(index)
        if isinstance(value, str) and value.strip().upper() in LABEL_ORDER:
            labels[index] = value.strip().upper()
    free = payload.get("free_mentions") or []
    mentions = [m for m in free if isinstance(m, str) and m.strip()] if isinstance(free, list) else []
    return labels, mentions


def turn_items(conversation: Conversation) -> List[Tuple[int, str, List[str]]]:
    """(turn number, tagged response, cited indices) of each valid turn that cites facts."""
    out = []
    for turn in conversation.ok_turns():
        indices = turn.turn.referenced_indices()
        if indices:
            out.append((turn.number, turn.turn.response, indices))
    return out


def annotate_conversation(
    conversation: Conversation,
    reference: MedicalProfile,
    judge: ChatPort,
    template: str = DEFAULT_TEMPLATE,
    annotator: str = "judge",
) -> List[AnnotationItem]:
    """Judge every cited fact of one conversation.

    Raises:
        PortError: judge transport failure
    """
    annotations: List[AnnotationItem] = []
    for number, utterance, indices in turn_items(conversation):
        prompt = render_judge_prompt(template, reference, number, utterance, indices)
        raw = judge.request(judge_system_prompt(), [ChatMessage(role="aid", content=prompt)])
        labels, mentions = parse_judge_reply(raw, indices)
        for index in indices:
            label = labels[index]
            annotations.append(AnnotationItem(
                conversation=conversation.conversation_id,
                turn=number,
                key=index,
                annotator=annotator,
                label=label,
                status=AnnotationStatus.LABELED if label else AnnotationStatus.ABSTAIN,
            ))
        seen: Set[str] = set()
        for text in mentions:
            key = FREE_PREFIX + (get_slug(text) or "mention")
            if key in seen:
                continue
            seen.add(key)
            annotations.append(AnnotationItem(
                conversation=conversation.conversation_id,
                turn=number,
                key=key,
                annotator=annotator,
                label="UNSUPPORTED",
            ))
    return annotations


def judge_annotate(
    conversations: Sequence[Conversation],
    references: Mapping[str, MedicalProfile],
    judge: ChatPort,
    template: str = DEFAULT_TEMPLATE,
    annotator: str = "judge",
    workers: int = 1,
    show_progress: bool = True,
) -> Tuple[AnnotationSet, List[JudgeFailure]]:
    """Annotate conversations with an LLM judge.

    `references` maps profile ids to the unperturbed profiles; conversations
    whose profile is missing there are judged against their own profile.
    A judge failure drops that conversation and is listed in the failures.
    """
    judge = guard(judge)
    ordered = sorted(conversations, key=lambda c: c.conversation_id)
    results: Dict[str, List[AnnotationItem]] = {}
    failures: List[JudgeFailure] = []

    def work(conversation: Conversation) -> List[AnnotationItem]:
        reference = references.get(conversation.profile_id, conversation.profile)
        return annotate_conversation(conversation, reference, judge, template, annotator)

    if workers <= 1:
        iterator = tqdm(ordered, desc="Judging", unit="conv") if show_progress else ordered
        for conversation in iterator:
            try:
                results[conversation.conversation_id] = work(conversation)
            except PortError as e:
                failures.append(JudgeFailure(conversation=conversation.conversation_id, error=str(e)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(work, c): c for c in ordered}
            completed = as_completed(futures)
            if show_progress:
                completed = tqdm(completed, total=len(futures), desc="Judging", unit="conv")
            for future in completed:
                conversation = futures[future]
                try:
                    results[conversation.conversation_id] = future.result()
                except PortError as e:
                    failures.append(JudgeFailure(conversation=conversation.conversation_id, error=str(e)))

    items = [item for cid in sorted(results) for item in results[cid]]
    failures.sort(key=lambda f: f.conversation)
    abstained = sum(1 for i in items if not i.labeled)
    logger.info(f"[Agreement] judge labeled {len(items) - abstained} items, abstained on {abstained}, "
                f"failed on {len(failures)} conversations")
    return AnnotationSet(items=items), failures


def answer_key_annotations(
    conversations: Sequence[Conversation],
    perturbed: Mapping[str, Iterable[str]],
    references: Optional[Mapping[str, MedicalProfile]] = None,
    annotator: str = "answer_key",
) -> AnnotationSet:
    """Ground-truth labels from perturbation records, plus profile classifications.

    `perturbed` maps profile ids to perturbed fact indices.
    """
    references = references or {}
    profile_indices = {
        c.profile_id: list(references.get(c.profile_id, c.profile).fact_map()) for c in conversations
    }
    key = AnswerKeyJudge(perturbed=perturbed, profile_indices=profile_indices)
    items: List[AnnotationItem] = []
    for conversation in sorted(conversations, key=lambda c: c.conversation_id):
        for number, _, indices in turn_items(conversation):
            for index in indices:
                items.append(AnnotationItem(
                    conversation=conversation.conversation_id, turn=number, key=index,
                    annotator=annotator, label=key.label(conversation.profile_id, index),
                ))
        for profile_key, value in zip(PROFILE_KEYS, (conversation.linguistic, conversation.behavioral)):
            items.append(AnnotationItem(
                conversation=conversation.conversation_id, turn=0, key=profile_key,
                annotator=annotator, label=value,
            ))
    return AnnotationSet(items=items)


def simulate_annotator(
    reference: AnnotationSet,
    annotator: str,
    noise: float = 0.08,
    seed: int = 0,
    profile_choices: Optional[Mapping[str, Sequence[str]]] = None,
) -> AnnotationSet:
    """A noisy copy of a reference annotation set.

    Each label flips with probability `noise` to a uniformly chosen other
    label: one of the three-way labels for medical items, one of
    `profile_choices[key]` (default: the labels seen for that key) for
    profile classification items.
    """
    if not 0.0 <= noise <= 1.0:
        raise AgreementError(f"noise must be in [0, 1], got {noise}")
    choices: Dict[str, List[str]] = {k: sorted(set(v)) for k, v in (profile_choices or {}).items()}
    for item in reference.items:
        if is_profile_key(item.key) and item.labeled and item.key not in (profile_choices or {}):
            choices.setdefault(item.key, [])
            if item.label not in choices[item.key]:
                choices[item.key].append(item.label)
    for values in choices.values():
        values.sort()

    rng = np.random.default_rng(stable_seed(seed, annotator))
    items: List[AnnotationItem] = []
    for item in sorted(reference.items, key=lambda i: i.item_key):
        label = item.label
        flip = rng.random() < noise
        pool = choices.get(item.key, []) if is_profile_key(item.key) else LABEL_ORDER
        alternatives = [v for v in pool if v != label]
        if item.labeled and flip and alternatives:
            label = alternatives[int(rng.integers(len(alternatives)))]
        items.append(item.model_copy(update={"annotator": annotator, "label": label}))
    return AnnotationSet(items=items)
