"""Report assembly, export and recompute-and-diff verification."""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional

import pandas as pd

from agreement.models import AgreementBundle, AnnotationSet
from core.errors import ReportError
from core.models import MedicalProfile
from core.utils import read_json, write_json
from metrics.models import MetricReport
from orchestrator.models import ExperimentManifest
from plugins.ports.stub_aid import DrugFeatureTable

from . import tables

logger = logging.getLogger("patsim.reporting")

ReportFormat = Literal["csv", "json"]


def policy_reference(profiles: Iterable[MedicalProfile], table: DrugFeatureTable) -> Dict[str, str]:
    """What the recommendation policy says on each full, unperturbed profile."""
    return {p.profile_id: table.recommend(p.feature_concepts()) for p in profiles}


def load_reference_policy(path: Path) -> Dict[str, str]:
    """profile_id -> expected recommendation from a two-column CSV."""
    path = Path(path)
    if not path.exists():
        raise ReportError(f"reference policy file not found: {path}")
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if not reader.fieldnames or not {"profile_id", "recommendation"} <= set(reader.fieldnames):
            raise ReportError(f"{path}: expected columns profile_id, recommendation")
        return {row["profile_id"].strip(): row["recommendation"].strip() for row in reader}


class ReportEngine:
    """Builds every report table and exports them."""

    def __init__(self, top_n: int = 20):
        self.top_n = top_n

    def build(
        self,
        manifest: ExperimentManifest,
        metrics: MetricReport,
        reference: Mapping[str, str],
        agreement: Optional[AgreementBundle] = None,
        judge: Optional[AnnotationSet] = None,
    ) -> Dict[str, pd.DataFrame]:
        """Tables keyed by file stem; agreement and judge tables only when given."""
        if not manifest.cells:
            raise ReportError("manifest has no cells")
        report: Dict[str, pd.DataFrame] = {}
        if agreement is not None:
            report["agreement"] = tables.agreement_table(agreement)
        if judge is not None:
            report["judge_labels"] = tables.label_share_table(judge)
            report["judge_by_linguistic"] = tables.judge_label_table(judge, manifest, "linguistic")
            report["judge_by_behavioral"] = tables.judge_label_table(judge, manifest, "behavioral")
        report["linguistic_metrics"] = tables.linguistic_metric_table(metrics, manifest)
        report["behavioral_metrics"] = tables.behavioral_metric_table(metrics, manifest)
        report["intersection"] = tables.intersection_table(metrics, manifest)
        report["recall"] = tables.recall_table(metrics)
        report["ranks"] = tables.rank_table(metrics, self.top_n)
        report["ranks_by_profile"] = tables.rank_by_profile_table(metrics, manifest, self.top_n)
        report["recommendations"] = tables.recommendation_table(metrics, manifest, reference)
        missing = sum(int((df == tables.MISSING).to_numpy().sum()) for df in report.values())
        if missing:
            logger.warning(f"[Report] {missing} cells marked {tables.MISSING}")
        return report

    def export(
        self,
        report: Mapping[str, pd.DataFrame],
        out_dir: Path,
        formats: Iterable[ReportFormat] = ("csv", "json"),
        meta: Optional[Dict[str, Any]] = None,
    ) -> List[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        exported: List[Path] = []
        formats = list(formats)
        print(f"\n[Export] Exporting report in {len(formats)} format(s)...")
        if "csv" in formats:
            for name, frame in report.items():
                path = out_dir / f"{name}.csv"
                frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
                exported.append(path)
            print(f"[Export] CSV saved to: {out_dir} ({len(report)} tables)")
        if "json" in formats:
            path = write_json(out_dir / "report.json", report_records(report, meta))
            exported.append(path)
            print(f"[Export] JSON saved to: {path}")
        return exported


def report_records(report: Mapping[str, pd.DataFrame], meta: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """JSON-ready form of a report; NaN becomes null."""
    return {
        "meta": meta or {},
        "tables": {name: json.loads(frame.to_json(orient="records")) for name, frame in report.items()},
    }


def load_report(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ReportError(f"report not found: {path}")
    return read_json(path)


def _same(a: Any, b: Any, tolerance: float) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return math.isclose(a, b, rel_tol=tolerance, abs_tol=tolerance)
    return a == b


def diff_reports(stored: Dict[str, Any], recomputed: Dict[str, Any], tolerance: float = 1e-9) -> List[str]:
    """Human-readable differences between two report records; empty when equal."""
    diffs: List[str] = []
    left, right = stored.get("tables", {}), recomputed.get("tables", {})
    for name in sorted(set(left) | set(right)):
        if name not in left or name not in right:
            diffs.append(f"{name}: present only in {'stored' if name in left else 'recomputed'} report")
            continue
        rows_a, rows_b = left[name], right[name]
        if len(rows_a) != len(rows_b):
            diffs.append(f"{name}: {len(rows_a)} rows stored, {len(rows_b)} recomputed")
            continue
        for i, (row_a, row_b) in enumerate(zip(rows_a, rows_b)):
            for column in sorted(set(row_a) | set(row_b)):
                if not _same(row_a.get(column), row_b.get(column), tolerance):
                    diffs.append(f"{name}[{i}].{column}: stored {row_a.get(column)!r}, "
                                 f"recomputed {row_b.get(column)!r}")
    return diffs
