"""Metric evaluation over conversation logs, plus delimited-text export."""
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from tqdm import tqdm

from core.models import ConceptCode
from core.utils import read_jsonl, write_jsonl
from ontology import Lexicon
from orchestrator.models import Conversation

from .linguistic import mean_or_none, medical_term_count, on_topic_similarity, response_length, turn_mean_score
from .models import CellMetrics, ConversationMetrics, MetricReport, RetrievalReport
from .readability import fkgl
from .retrieval import concept_recall, rank_items, retrieval_rank_metrics

logger = logging.getLogger("patsim.metrics")

CELL_FIELDS = ("fkgl", "avg_response_length", "medical_term_count", "depression_score", "toxicity", "on_topic_similarity")


@dataclass
class MetricPorts:
    """Collaborators the metrics need besides the logs."""
    lexicon: Lexicon
    embedder: object
    depression: object
    toxicity: object


def expressed_concepts(conversation: Conversation) -> Set[ConceptCode]:
    """Feature concepts the patient actually cited in valid turns."""
    facts = conversation.profile.fact_map()
    cited: Set[ConceptCode] = set()
    for turn in conversation.ok_turns():
        for index in turn.turn.referenced_indices():
            fact = facts.get(index)
            if fact is not None and fact.demographic is None:
                cited.add(fact.code)
    return cited


def reference_concepts(conversation: Conversation, scope: str = "expressed") -> Set[ConceptCode]:
    if scope == "profile":
        return conversation.profile.feature_concepts()
    return expressed_concepts(conversation)


def retrieval_report(conversation: Conversation, scope: str = "expressed", top_n: int = 20) -> RetrievalReport:
    reference = reference_concepts(conversation, scope)
    intake = conversation.intake
    extracted = intake.extracted if intake else []
    traces = intake.traces if intake else []
    return RetrievalReport(
        recall=concept_recall(reference, extracted),
        ranks=retrieval_rank_metrics(rank_items(reference, traces), top_n=top_n),
    )


def evaluate_conversation(
    conversation: Conversation,
    ports: MetricPorts,
    fkgl_backend: str = "heuristic",
    reference_scope: str = "expressed",
    top_n: int = 20,
) -> ConversationMetrics:
    """Every linguistic, behavioral and retrieval metric of one conversation."""
    ok = conversation.ok_turns()
    texts = [t.patient_text for t in ok]
    depression = turn_mean_score(texts, ports.depression)
    toxicity = turn_mean_score(texts, ports.toxicity)
    similarity = on_topic_similarity([(t.aid_utterance, t.patient_text) for t in ok], ports.embedder)
    return ConversationMetrics(
        conversation_id=conversation.conversation_id,
        profile_id=conversation.profile_id,
        linguistic=conversation.linguistic,
        behavioral=conversation.behavioral,
        status=conversation.status.value,
        n_turns=len(conversation.turns),
        parse_failed_turns=len(conversation.turns) - len(ok),
        fkgl=fkgl(texts, backend=fkgl_backend),
        avg_response_length=response_length(texts),
        medical_term_count=medical_term_count(texts, ports.lexicon),
        depression_score=depression.value,
        depression_complete=depression.complete,
        toxicity=toxicity.value,
        toxicity_complete=toxicity.complete,
        on_topic_similarity=similarity.value,
        on_topic_skipped=similarity.skipped,
        retrieval=retrieval_report(conversation, reference_scope, top_n),
        recommendation=conversation.final_recommendation,
    )


def aggregate_cells(metrics: Sequence[ConversationMetrics]) -> List[CellMetrics]:
    """Per (linguistic, behavioral) means; each mean ignores undefined values."""
    groups: Dict[Tuple[str, str], List[ConversationMetrics]] = {}
    for m in metrics:
        groups.setdefault((m.linguistic, m.behavioral), []).append(m)
    cells = []
    for (linguistic, behavioral), members in sorted(groups.items()):
        cell = CellMetrics(linguistic=linguistic, behavioral=behavioral, conversations=len(members))
        for name in CELL_FIELDS:
            values = [getattr(m, name) for m in members]
            setattr(cell, name, mean_or_none(values))
            cell.counts[name] = sum(1 for v in values if v is not None)
        cells.append(cell)
    return cells


def evaluate_conversations(
    conversations: Sequence[Conversation],
    ports: MetricPorts,
    fkgl_backend: str = "heuristic",
    reference_scope: str = "expressed",
    top_n: int = 20,
    workers: int = 1,
    show_progress: bool = True,
) -> MetricReport:
    """Evaluate a batch; output is ordered by conversation id."""
    def evaluate(conversation: Conversation) -> ConversationMetrics:
        return evaluate_conversation(conversation, ports, fkgl_backend, reference_scope, top_n)

    ordered = sorted(conversations, key=lambda c: c.conversation_id)
    if workers <= 1:
        iterator = tqdm(ordered, desc="Evaluating", unit="conv") if show_progress else ordered
        results = [evaluate(c) for c in iterator]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            mapped = executor.map(evaluate, ordered)
            if show_progress:
                mapped = tqdm(mapped, total=len(ordered), desc="Evaluating", unit="conv")
            results = list(mapped)
    logger.info(f"[Metrics] evaluated {len(results)} conversations")
    return MetricReport(conversations=results, cells=aggregate_cells(results))


# --- export -----------------------------------------------------------------

CONVERSATION_COLUMNS = [
    "conversation_id", "profile_id", "linguistic", "behavioral", "status",
    "n_turns", "parse_failed_turns",
    "fkgl", "avg_response_length", "medical_term_count",
    "depression_score", "depression_complete", "toxicity", "toxicity_complete",
    "on_topic_similarity", "on_topic_skipped",
    "reference_count", "retrieved", "missed", "recall",
    "recall_diagnosis", "recall_medication", "recall_procedure", "extra_concepts",
    "rank_items", "rank1", "beyond_rank1", "within_top_n", "not_retrieved", "mean_nontop1_rank",
    "recommendation",
]

CELL_COLUMNS = ["linguistic", "behavioral", "conversations", *CELL_FIELDS]


def _cell(value) -> object:
    return "" if value is None else value


def write_metric_report(report: MetricReport, out_dir: Path) -> Dict[str, Path]:
    """Write conversations.csv, conversations.jsonl and cells.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "conversations_csv": out_dir / "conversations.csv",
        "conversations_jsonl": out_dir / "conversations.jsonl",
        "cells_csv": out_dir / "cells.csv",
    }
    with open(paths["conversations_csv"], "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CONVERSATION_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for m in report.conversations:
            writer.writerow({k: _cell(v) for k, v in m.flat().items()})
    write_jsonl(paths["conversations_jsonl"], (m.model_dump(mode="json") for m in report.conversations))
    with open(paths["cells_csv"], "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CELL_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for cell in report.cells:
            writer.writerow({k: _cell(v) for k, v in cell.model_dump().items()})
    return paths


def load_metric_report(out_dir: Path) -> MetricReport:
    rows = [ConversationMetrics.model_validate(r) for r in read_jsonl(Path(out_dir) / "conversations.jsonl")]
    return MetricReport(conversations=rows, cells=aggregate_cells(rows))


def export_embeddings(
    conversations: Sequence[Conversation],
    embedder,
    out_dir: Path,
) -> Optional[Tuple[Path, Path]]:
    """Per-turn patient response embeddings for external t-SNE tools.

    embeddings.tsv holds one tab-separated vector per row;
    embeddings_labels.tsv has a header and one (conversation, turn,
    linguistic, behavioral) row per vector, in the same order.
    """
    rows: List[Tuple[str, int, str, str]] = []
    texts: List[str] = []
    for conversation in sorted(conversations, key=lambda c: c.conversation_id):
        for turn in conversation.ok_turns():
            rows.append((conversation.conversation_id, turn.number, conversation.linguistic, conversation.behavioral))
            texts.append(turn.patient_text)
    if not texts:
        return None
    vectors = np.asarray(embedder.embed(texts), dtype=float)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vec_path = out_dir / "embeddings.tsv"
    label_path = out_dir / "embeddings_labels.tsv"
    np.savetxt(vec_path, vectors, delimiter="\t", fmt="%.6f")
    with open(label_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(["conversation", "turn", "linguistic", "behavioral"])
        writer.writerows(rows)
    return vec_path, label_path
