"""Agreement reports over annotation sets."""
import logging
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Set, Tuple

from core.utils import read_json, write_json

from .adjudication import adjudicate
from .bootstrap import paired_bootstrap_kappa
from .models import (
    PROFILE_KEYS,
    AgreementBundle,
    AgreementReport,
    AnnotationItem,
    AnnotationSet,
    ItemKey,
    JudgeFailure,
    LabelDistribution,
    is_free_mention,
    is_profile_key,
)
from .stats import accuracy, align, cohens_kappa, confusion_matrix, label_counts, label_space, micro_f1

logger = logging.getLogger("patsim.agreement")


def paired_labels(
    a: AnnotationSet,
    b: AnnotationSet,
    excluded_conversations: Iterable[str] = (),
) -> Tuple[List[ItemKey], List[str], List[str], int, int]:
    """Aligned label vectors of two sources, with what was left out.

    Free mentions and items either side abstained on are dropped and
    counted; items of excluded conversations are dropped silently. The rest
    must align exactly (AlignmentError otherwise).
    """
    skip: Set[str] = set(excluded_conversations)
    abstained = {k for s in (a, b) for k in s.abstained()}
    free = 0

    def usable(annotations: AnnotationSet) -> dict:
        nonlocal free
        out = {}
        for key, label in annotations.labels().items():
            if key[0] in skip or key in abstained:
                continue
            if is_free_mention(key[2]):
                free += 1
                continue
            out[key] = label
        return out

    left, right = usable(a), usable(b)
    keys, la, lb = align(left, right)
    dropped = sum(1 for k in abstained if k[0] not in skip)
    return keys, la, lb, dropped, free


def agreement_report(
    a: AnnotationSet,
    b: AnnotationSet,
    annotator_a: str,
    annotator_b: str,
    scope: str = "medical",
    excluded_conversations: Iterable[str] = (),
) -> AgreementReport:
    """Kappa, micro-F1 (b as reference) and the confusion table of a vs b."""
    excluded = sorted(set(excluded_conversations))
    keys, la, lb, abstained, free = paired_labels(a, b, excluded)
    report = AgreementReport(
        annotator_a=annotator_a,
        annotator_b=annotator_b,
        scope=scope,
        n_items=len(keys),
        abstained=abstained,
        excluded_free_mentions=free,
        excluded_conversations=len(excluded),
    )
    if not keys:
        return report
    report.labels = label_space(la, lb)
    report.kappa = cohens_kappa(la, lb)
    report.micro_f1 = micro_f1(la, lb)
    report.accuracy = accuracy(la, lb)
    report.confusion = confusion_matrix(la, lb, report.labels)
    return report


def restrict(annotations: AnnotationSet, keep: Callable[[AnnotationItem], bool]) -> AnnotationSet:
    return AnnotationSet(items=[i for i in annotations.items if keep(i)])


def label_distribution(annotations: AnnotationSet, annotator: str) -> LabelDistribution:
    medical = [i for i in annotations.items if not is_profile_key(i.key)]
    labels = [i.label for i in medical if i.labeled]
    counts = label_counts(labels) if labels else {}
    total = sum(counts.values())
    return LabelDistribution(
        annotator=annotator,
        counts=counts,
        shares={k: v / total for k, v in counts.items()} if total else {},
        abstained=sum(1 for i in medical if not i.labeled),
        free_mentions=sum(1 for i in medical if is_free_mention(i.key) and i.labeled),
    )


def compute_agreement(
    first: AnnotationSet,
    second: AnnotationSet,
    judge: Optional[AnnotationSet] = None,
    judge_failures: Iterable[JudgeFailure] = (),
    resolution: Optional[AnnotationSet] = None,
    resamples: int = 10000,
    seed: int = 0,
    cluster_by_conversation: bool = False,
    perturbed_items: Optional[Set[Tuple[str, str]]] = None,
    names: Tuple[str, str, str] = ("annotator_1", "annotator_2", "judge"),
) -> AgreementBundle:
    """Human-human and human-judge agreement, adjudication and the bootstrap test.

    Medical reports: first vs second, judge vs each human and judge vs the
    consensus when it is complete. The paired bootstrap compares
    kappa(first, second) with kappa(first, judge) on items all three share.
    Profile classification reports compare the two humans per dimension.
    With `perturbed_items` ((conversation, fact index) pairs) the medical
    reports are repeated for unperturbed and perturbed items separately.
    """
    name_1, name_2, name_j = names
    failures = sorted(judge_failures, key=lambda f: f.conversation)
    failed = [f.conversation for f in failures]
    bundle = AgreementBundle(judge_failures=failures)

    human_1, human_2 = first.medical(), second.medical()
    bundle.medical.append(agreement_report(human_1, human_2, name_1, name_2))
    adjudication = adjudicate(human_1, human_2, resolution=resolution)
    bundle.consensus_complete = adjudication.complete
    bundle.unresolved = adjudication.disagreements
    bundle.distributions = [label_distribution(first, name_1), label_distribution(second, name_2)]

    if judge is not None:
        judged = judge.medical()
        bundle.distributions.append(label_distribution(judged, name_j))
        for human, name in ((human_1, name_1), (human_2, name_2)):
            bundle.medical.append(agreement_report(judged, human, name_j, name, excluded_conversations=failed))
        if adjudication.complete:
            bundle.medical.append(agreement_report(
                judged, adjudication.consensus, name_j, "consensus", excluded_conversations=failed,
            ))
        keys, la, lb, _, _ = paired_labels(human_1, human_2, failed)
        judge_labels = judged.labels()
        shared = [i for i, k in enumerate(keys) if k in judge_labels]
        if shared:
            a = [la[i] for i in shared]
            b = [lb[i] for i in shared]
            c = [judge_labels[keys[i]] for i in shared]
            clusters = [keys[i][0] for i in shared] if cluster_by_conversation else None
            if cohens_kappa(a, b) is not None and cohens_kappa(a, c) is not None:
                bundle.medical[0].bootstrap = paired_bootstrap_kappa(
                    a, b, c, resamples=resamples, seed=seed, clusters=clusters,
                )
            else:
                logger.warning("[Agreement] bootstrap skipped: observed kappa undefined")

    if perturbed_items is not None:
        reference_name, reference = (
            ("consensus", adjudication.consensus) if adjudication.complete else (name_1, human_1)
        )
        for scope, wanted in (("medical:unperturbed", False), ("medical:perturbed", True)):
            def keep(item: AnnotationItem, wanted: bool = wanted) -> bool:
                return ((item.conversation, item.key) in perturbed_items) == wanted

            part_1, part_2 = restrict(human_1, keep), restrict(human_2, keep)
            if not part_1.items:
                continue
            bundle.medical.append(agreement_report(part_1, part_2, name_1, name_2, scope=scope))
            if judge is not None:
                bundle.medical.append(agreement_report(
                    restrict(judge.medical(), keep), restrict(reference, keep), name_j, reference_name,
                    scope=scope, excluded_conversations=failed,
                ))

    for key in PROFILE_KEYS:
        left, right = first.profile_items(key), second.profile_items(key)
        if left.items and right.items:
            bundle.profile.append(agreement_report(left, right, name_1, name_2, scope=key))
    return bundle


def write_agreement(bundle: AgreementBundle, path: Path) -> Path:
    return write_json(Path(path), bundle.model_dump(mode="json"))


def load_agreement(path: Path) -> AgreementBundle:
    return AgreementBundle.model_validate(read_json(Path(path)))
