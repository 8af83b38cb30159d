"""Report tables as pandas frames, one function per table shape.

Rows are driven by the manifest, so a profile or cell the design planned
but that produced no data still gets a row, filled with MISSING.
"""
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import pandas as pd
from sklearn.metrics import precision_recall_fscore_support

from agreement.models import LABEL_ORDER, AgreementBundle, AnnotationSet, is_free_mention
from core.models import FEATURE_VOCABULARIES
from metrics.models import ConversationMetrics, MetricReport
from metrics.retrieval import pool_rank_breakdowns, pool_recall
from orchestrator.models import ExperimentManifest
from persona.models import BehavioralName, LinguisticName
from plugins.ports.base import NO_RECOMMENDATION

MISSING = "MISSING"

FIXED_BEHAVIORAL = BehavioralName.STRUCTURED_COOPERATIVE.value
FIXED_LINGUISTIC = LinguisticName.FUNCTIONAL_HL.value

LINGUISTIC_COLUMNS = {
    "fkgl": "reading_level",
    "avg_response_length": "response_length",
    "medical_term_count": "medical_terms",
    "depression_score": "depression_score",
}
BEHAVIORAL_COLUMNS = {
    "on_topic_similarity": "on_topic_similarity",
    "toxicity": "toxicity",
}


def _ordered(values: Iterable[str], enum_type) -> List[str]:
    known = [member.value for member in enum_type]
    unique = set(values)
    return [v for v in known if v in unique] + sorted(unique - set(known))


def planned_values(manifest: ExperimentManifest, dimension: str, fixed: Optional[Tuple[str, str]] = None) -> List[str]:
    """Profile names the manifest planned along one dimension, in canonical order.

    `fixed` is (other dimension, value) restricting cells, e.g.
    ("behavioral", "structured_cooperative").
    """
    values = []
    for cell in manifest.cells:
        if fixed and getattr(cell, fixed[0]) != fixed[1]:
            continue
        values.append(getattr(cell, dimension))
    return _ordered(values, LinguisticName if dimension == "linguistic" else BehavioralName)


def planned_cells(manifest: ExperimentManifest) -> List[Tuple[str, str]]:
    cells = {(c.linguistic, c.behavioral) for c in manifest.cells}
    lin = _ordered([c[0] for c in cells], LinguisticName)
    beh = _ordered([c[1] for c in cells], BehavioralName)
    return sorted(cells, key=lambda c: (beh.index(c[1]), lin.index(c[0])))


def _missing_row(key: Dict[str, object], columns: Sequence[str]) -> Dict[str, object]:
    return {**key, **{c: MISSING for c in columns}}


def _select(metrics: Sequence[ConversationMetrics], **where: str) -> List[ConversationMetrics]:
    return [m for m in metrics if all(getattr(m, k) == v for k, v in where.items())]


def _mean(values: Iterable[Optional[float]]):
    present = [v for v in values if v is not None]
    return sum(present) / len(present) if present else MISSING


# --- agreement -------------------------------------------------------------

def agreement_table(bundle: AgreementBundle) -> pd.DataFrame:
    """n, micro-F1 and kappa per scope and annotator pair."""
    rows = []
    for report in [*bundle.medical, *bundle.profile]:
        rows.append({
            "scope": report.scope,
            "annotator_a": report.annotator_a,
            "annotator_b": report.annotator_b,
            "n": report.n_items,
            "micro_f1": report.micro_f1 if report.micro_f1 is not None else MISSING,
            "kappa": report.kappa if report.kappa is not None else MISSING,
            "abstained": report.abstained,
            "free_mentions_excluded": report.excluded_free_mentions,
            "bootstrap_delta": report.bootstrap.delta if report.bootstrap else "",
            "bootstrap_p": report.bootstrap.p_value if report.bootstrap else "",
        })
    return pd.DataFrame(rows, columns=[
        "scope", "annotator_a", "annotator_b", "n", "micro_f1", "kappa",
        "abstained", "free_mentions_excluded", "bootstrap_delta", "bootstrap_p",
    ])


def judge_label_table(
    annotations: AnnotationSet,
    manifest: ExperimentManifest,
    dimension: str = "linguistic",
    fixed: Optional[Tuple[str, str]] = None,
) -> pd.DataFrame:
    """Judge label counts per profile along one dimension."""
    if fixed is None:
        fixed = ("behavioral", FIXED_BEHAVIORAL) if dimension == "linguistic" else ("linguistic", FIXED_LINGUISTIC)
    cells = {e.conversation_id: e for e in manifest.conversations}
    rows = []
    for value in planned_values(manifest, dimension, fixed):
        members = {
            cid for cid, entry in cells.items()
            if getattr(entry, dimension) == value and getattr(entry, fixed[0]) == fixed[1]
        }
        items = [i for i in annotations.medical().items if i.conversation in members and i.labeled]
        if not members:
            rows.append(_missing_row({"profile": value}, LABEL_ORDER))
            continue
        counts = {label: sum(1 for i in items if i.label == label) for label in LABEL_ORDER}
        rows.append({"profile": value, **counts})
    return pd.DataFrame(rows, columns=["profile", *LABEL_ORDER])


def label_share_table(annotations: AnnotationSet) -> pd.DataFrame:
    """Overall label shares of one annotation source, free mentions separate."""
    items = [i for i in annotations.medical().items if i.labeled]
    total = len(items)
    rows = []
    for label in LABEL_ORDER:
        count = sum(1 for i in items if i.label == label)
        rows.append({"label": label, "count": count, "share": count / total if total else MISSING})
    rows.append({
        "label": "free_mentions",
        "count": sum(1 for i in items if is_free_mention(i.key)),
        "share": "",
    })
    return pd.DataFrame(rows, columns=["label", "count", "share"])


# --- linguistic and behavioral metrics -------------------------------------

def profile_metric_table(
    report: MetricReport,
    manifest: ExperimentManifest,
    dimension: str,
    columns: Mapping[str, str],
    fixed: Tuple[str, str],
) -> pd.DataFrame:
    rows = []
    for value in planned_values(manifest, dimension, fixed):
        members = _select(report.conversations, **{dimension: value, fixed[0]: fixed[1]})
        if not members:
            rows.append(_missing_row({"profile": value, "conversations": 0}, list(columns.values())))
            continue
        row = {"profile": value, "conversations": len(members)}
        for field, name in columns.items():
            row[name] = _mean(getattr(m, field) for m in members)
        rows.append(row)
    return pd.DataFrame(rows, columns=["profile", "conversations", *columns.values()])


def linguistic_metric_table(report: MetricReport, manifest: ExperimentManifest,
                            behavioral: str = FIXED_BEHAVIORAL) -> pd.DataFrame:
    return profile_metric_table(report, manifest, "linguistic", LINGUISTIC_COLUMNS, ("behavioral", behavioral))


def behavioral_metric_table(report: MetricReport, manifest: ExperimentManifest,
                            linguistic: str = FIXED_LINGUISTIC) -> pd.DataFrame:
    return profile_metric_table(report, manifest, "behavioral", BEHAVIORAL_COLUMNS, ("linguistic", linguistic))


def intersection_table(report: MetricReport, manifest: ExperimentManifest) -> pd.DataFrame:
    """Every planned cell against every linguistic and behavioral metric."""
    metrics = {**LINGUISTIC_COLUMNS, **BEHAVIORAL_COLUMNS}
    rows = []
    for linguistic, behavioral in planned_cells(manifest):
        members = _select(report.conversations, linguistic=linguistic, behavioral=behavioral)
        key = {"behavioral": behavioral, "linguistic": linguistic, "conversations": len(members)}
        if not members:
            rows.append(_missing_row(key, list(metrics.values())))
            continue
        rows.append({**key, **{name: _mean(getattr(m, f) for m in members) for f, name in metrics.items()}})
    return pd.DataFrame(rows, columns=["behavioral", "linguistic", "conversations", *metrics.values()])


# --- retrieval --------------------------------------------------------------

def recall_table(report: MetricReport) -> pd.DataFrame:
    """Pooled intake recall, overall and per vocabulary."""
    pooled, excluded = pool_recall(m.retrieval.recall for m in report.conversations)
    vocabularies = [v.value for v in FEATURE_VOCABULARIES]

    def row(metric: str, overall, per_vocab: Mapping[str, object]) -> Dict[str, object]:
        out = {"metric": metric, "overall": overall}
        for v in vocabularies:
            value = per_vocab.get(v)
            out[v] = MISSING if value is None else value
        return out

    missed_by = {
        v: pooled.reference_by_vocabulary.get(v, 0) - pooled.retrieved_by_vocabulary.get(v, 0) for v in vocabularies
    }
    recall_pct = {v: (r * 100 if r is not None else None) for v, r in pooled.by_vocabulary.items()}
    rows = [
        row("reference_concepts", pooled.reference_count, pooled.reference_by_vocabulary),
        row("retrieved", pooled.retrieved, pooled.retrieved_by_vocabulary),
        row("missed", pooled.missed, missed_by),
        row("recall_pct", pooled.recall * 100 if pooled.recall is not None else MISSING, recall_pct),
        row("outside_reference", pooled.extra_concepts_outside_reference, pooled.extra_by_vocabulary),
        row("conversations_without_reference", excluded, {}),
    ]
    return pd.DataFrame(rows, columns=["metric", "overall", *vocabularies])


def rank_table(report: MetricReport, top_n: int = 20) -> pd.DataFrame:
    pooled = pool_rank_breakdowns((m.retrieval.ranks for m in report.conversations), top_n=top_n)

    def pct(value: Optional[float]):
        return MISSING if value is None else value * 100

    rows = [
        {"metric": "conversations", "value": len(report.conversations), "count": ""},
        {"metric": "reference_concepts", "value": pooled.n_items, "count": ""},
        {"metric": "rank1_pct", "value": pct(pooled.rank1_accuracy), "count": pooled.rank1},
        {"metric": "beyond_rank1_pct", "value": pct(pooled.beyond_rank1_share), "count": pooled.beyond_rank1},
        {"metric": f"within_top{top_n}_of_non_rank1_pct", "value": pct(pooled.within_top_n_of_non_rank1),
         "count": pooled.within_top_n},
        {"metric": "not_retrieved_pct", "value": pct(pooled.not_retrieved_share), "count": pooled.not_retrieved},
        {"metric": "mean_nontop1_rank",
         "value": MISSING if pooled.mean_nontop1_rank is None else pooled.mean_nontop1_rank, "count": ""},
    ]
    return pd.DataFrame(rows, columns=["metric", "value", "count"])


def rank_by_profile_table(report: MetricReport, manifest: ExperimentManifest, top_n: int = 20) -> pd.DataFrame:
    """Rank-1 and rank-top_n accuracy per linguistic profile, behavioral profile and cell."""
    groups: List[Tuple[str, str, List[ConversationMetrics]]] = []
    for value in planned_values(manifest, "linguistic"):
        groups.append(("linguistic", value, _select(report.conversations, linguistic=value)))
    for value in planned_values(manifest, "behavioral"):
        groups.append(("behavioral", value, _select(report.conversations, behavioral=value)))
    for linguistic, behavioral in planned_cells(manifest):
        groups.append(("cell", f"{linguistic}/{behavioral}",
                       _select(report.conversations, linguistic=linguistic, behavioral=behavioral)))
    rows = []
    columns = ["rank1_accuracy", f"rank{top_n}_accuracy", "items"]
    for group, name, members in groups:
        pooled = pool_rank_breakdowns((m.retrieval.ranks for m in members), top_n=top_n)
        if not pooled.n_items:
            rows.append(_missing_row({"group": group, "profile": name}, columns))
            continue
        rows.append({
            "group": group,
            "profile": name,
            "rank1_accuracy": pooled.rank1 / pooled.n_items,
            f"rank{top_n}_accuracy": (pooled.rank1 + pooled.within_top_n) / pooled.n_items,
            "items": pooled.n_items,
        })
    return pd.DataFrame(rows, columns=["group", "profile", *columns])


# --- recommendations --------------------------------------------------------

def weighted_scores(truth: Sequence[str], predicted: Sequence[str]) -> Tuple[float, float, float]:
    """Support-weighted precision, recall and F1 over the labels present in truth or predictions."""
    precision, recall, f1, _ = precision_recall_fscore_support(
        list(truth), list(predicted), average="weighted", zero_division=0,
    )
    return float(precision), float(recall), float(f1)


def recommendation_table(
    report: MetricReport,
    manifest: ExperimentManifest,
    reference: Mapping[str, str],
) -> pd.DataFrame:
    """Weighted P/R/F1 of final recommendations against a reference policy, per cell.

    Conversations without a final recommendation count as NO_RECOMMENDATION;
    conversations whose profile has no reference entry are left out and counted.
    """
    rows = []
    columns = ["precision", "recall", "f1"]
    for linguistic, behavioral in planned_cells(manifest):
        members = _select(report.conversations, linguistic=linguistic, behavioral=behavioral)
        scored = [m for m in members if m.profile_id in reference]
        key = {
            "behavioral": behavioral,
            "linguistic": linguistic,
            "conversations": len(scored),
            "unreferenced": len(members) - len(scored),
        }
        if not scored:
            rows.append(_missing_row(key, columns))
            continue
        truth = [reference[m.profile_id] for m in scored]
        predicted = [m.recommendation or NO_RECOMMENDATION for m in scored]
        precision, recall, f1 = weighted_scores(truth, predicted)
        rows.append({**key, "precision": precision, "recall": recall, "f1": f1})
    return pd.DataFrame(rows, columns=["behavioral", "linguistic", "conversations", "unreferenced", *columns])
