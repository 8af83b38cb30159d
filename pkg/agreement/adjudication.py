"""Merge two annotators into a consensus set."""
import logging
from typing import Dict, Optional

from core.errors import AgreementError, AlignmentError

from .models import (
    CONSENSUS,
    AdjudicationResult,
    AnnotationItem,
    AnnotationSet,
    Disagreement,
    ItemKey,
)

logger = logging.getLogger("patsim.agreement")


def _by_key(annotations: AnnotationSet) -> Dict[ItemKey, AnnotationItem]:
    keyed: Dict[ItemKey, AnnotationItem] = {}
    for item in annotations.items:
        if item.item_key in keyed:
            raise AgreementError(f"several annotators in one adjudication input at {item.item_key}")
        keyed[item.item_key] = item
    return keyed


def adjudicate(
    a: AnnotationSet,
    b: AnnotationSet,
    resolution: Optional[AnnotationSet] = None,
    annotator: str = CONSENSUS,
) -> AdjudicationResult:
    """Agreements pass through; disagreements are resolved or listed.

    Both inputs must cover the same item keys. An item counts as agreed
    only when both sides gave the same label; any abstention is a
    disagreement. Resolution entries must target open disagreements and
    never introduce keys outside the item universe.
    """
    left, right = _by_key(a), _by_key(b)
    only_a = sorted(set(left) - set(right))
    only_b = sorted(set(right) - set(left))
    if only_a or only_b:
        raise AlignmentError("adjudication inputs cover different items", only_a=only_a, only_b=only_b)

    resolved_labels: Dict[ItemKey, str] = {}
    if resolution is not None:
        for item in resolution.items:
            if not item.labeled:
                continue
            if item.item_key not in left:
                raise AgreementError(f"resolution for unknown item {item.item_key}")
            resolved_labels[item.item_key] = item.label

    consensus = []
    open_items = []
    resolved = 0
    for key in sorted(left):
        x, y = left[key], right[key]
        conversation, turn, item_key = key
        if x.labeled and y.labeled and x.label == y.label:
            label = x.label
        elif key in resolved_labels:
            label = resolved_labels[key]
            resolved += 1
        else:
            open_items.append(Disagreement(
                conversation=conversation, turn=turn, key=item_key, label_a=x.label, label_b=y.label,
            ))
            continue
        consensus.append(AnnotationItem(
            conversation=conversation, turn=turn, key=item_key, annotator=annotator, label=label,
        ))

    if open_items:
        logger.warning(f"[Agreement] consensus incomplete: {len(open_items)} unresolved disagreements")
    return AdjudicationResult(consensus=AnnotationSet(items=consensus), disagreements=open_items, resolved=resolved)
