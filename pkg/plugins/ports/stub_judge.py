"""Answer-key judge: labels items from the perturbation ground truth.

Reads the "PROFILE_ID:" and "ITEMS:" lines of the judge prompt and labels
perturbed indices INACCURATE, indices outside the profile UNSUPPORTED and
everything else ACCURATE.
"""
import json
import re
from typing import Dict, Iterable, List, Optional, Set

from .base import ChatMessage, ChatPort
from .registry import PortRegistry

_PROFILE_LINE = re.compile(r"^PROFILE_ID:\s*(\S+)\s*$", re.MULTILINE)
_ITEMS_LINE = re.compile(r"^ITEMS:\s*(\[.*\])\s*$", re.MULTILINE)


class AnswerKeyJudge(ChatPort):
    """Deterministic judge for offline agreement runs."""

    name = "stub_judge"
    description = "Answer-key judge built from perturbation records (offline)"

    def __init__(
        self,
        perturbed: Optional[Dict[str, Iterable[str]]] = None,
        profile_indices: Optional[Dict[str, Iterable[str]]] = None,
    ):
        self.perturbed: Dict[str, Set[str]] = {k: set(v) for k, v in (perturbed or {}).items()}
        self.profile_indices: Optional[Dict[str, Set[str]]] = (
            {k: set(v) for k, v in profile_indices.items()} if profile_indices is not None else None
        )

    def label(self, profile_id: str, index: str) -> str:
        if self.profile_indices is not None and index not in self.profile_indices.get(profile_id, set()):
            return "UNSUPPORTED"
        if index in self.perturbed.get(profile_id, set()):
            return "INACCURATE"
        return "ACCURATE"

    def request(self, system_prompt: str, messages: List[ChatMessage]) -> str:
        prompt = "\n".join(m.content for m in messages) or system_prompt
        profile = _PROFILE_LINE.search(prompt)
        items = _ITEMS_LINE.search(prompt)
        if not profile or not items:
            return "I cannot judge this turn."
        profile_id = profile.group(1)
        labels = {idx: self.label(profile_id, idx) for idx in json.loads(items.group(1))}
        return json.dumps({"labels": labels, "free_mentions": []}, sort_keys=True)


PortRegistry.register(AnswerKeyJudge)
