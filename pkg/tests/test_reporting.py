import json

import pandas as pd
import pytest

from agreement import AgreementBundle, AgreementReport, AnnotationItem, AnnotationSet
from core.errors import ReportError
from metrics.models import ConversationMetrics, MetricReport, RankBreakdown, RecallBreakdown, RetrievalReport
from orchestrator.models import ConversationStatus, ExperimentManifest, ManifestCell, ManifestEntry
from reporting import (
    MISSING,
    ReportEngine,
    diff_reports,
    load_reference_policy,
    load_report,
    recommendation_table,
    report_records,
    weighted_scores,
)
from reporting.tables import intersection_table, judge_label_table, linguistic_metric_table, rank_table, recall_table

CELLS = [
    ("limited_hl", "structured_cooperative"),
    ("proficient_hl", "structured_cooperative"),
    ("functional_hl", "adversarial_combative"),
]


def make_manifest(cells=CELLS, profiles=("p0", "p1")) -> ExperimentManifest:
    entries, manifest_cells = [], []
    for linguistic, behavioral in cells:
        ids = [f"{p}__{linguistic}__{behavioral}" for p in profiles]
        manifest_cells.append(ManifestCell(linguistic=linguistic, behavioral=behavioral,
                                           profile_ids=list(profiles), count=len(ids)))
        for pid, cid in zip(profiles, ids):
            entries.append(ManifestEntry(conversation_id=cid, profile_id=pid, linguistic=linguistic,
                                         behavioral=behavioral, status=ConversationStatus.COMPLETED))
    return ExperimentManifest(design_id="t", seed=0, toolkit_version="test", cells=manifest_cells,
                              conversations=entries)


def metric_row(profile, linguistic, behavioral, fkgl=5.0, recommendation="drug_a", **extra) -> ConversationMetrics:
    return ConversationMetrics(
        conversation_id=f"{profile}__{linguistic}__{behavioral}",
        profile_id=profile,
        linguistic=linguistic,
        behavioral=behavioral,
        status="completed",
        fkgl=fkgl,
        avg_response_length=10.0,
        toxicity=0.1,
        recommendation=recommendation,
        retrieval=RetrievalReport(
            recall=RecallBreakdown(reference_count=4, retrieved=3, missed=1, recall=0.75,
                                   by_vocabulary={"diagnosis": 0.5, "medication": 1.0, "procedure": None},
                                   reference_by_vocabulary={"diagnosis": 2, "medication": 2},
                                   retrieved_by_vocabulary={"diagnosis": 1, "medication": 2}),
            ranks=RankBreakdown(n_items=4, rank1=2, beyond_rank1=1, within_top_n=1, not_retrieved=1,
                                rank1_accuracy=0.5, beyond_rank1_share=0.25, within_top_n_of_non_rank1=1.0,
                                not_retrieved_share=0.25, mean_nontop1_rank=3.0),
        ),
        **extra,
    )


@pytest.fixture
def metrics():
    rows = [
        metric_row("p0", "limited_hl", "structured_cooperative", fkgl=2.0),
        metric_row("p1", "limited_hl", "structured_cooperative", fkgl=4.0, recommendation=None),
        metric_row("p0", "proficient_hl", "structured_cooperative", fkgl=11.0),
        metric_row("p1", "proficient_hl", "structured_cooperative", fkgl=None, recommendation="drug_b"),
    ]
    return MetricReport(conversations=rows)


def test_weighted_scores():
    precision, recall, f1 = weighted_scores(["a", "a", "b", "b"], ["a", "b", "b", "b"])
    assert recall == pytest.approx(0.75)
    assert precision == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3))
    assert f1 == pytest.approx(0.5 * (2 / 3) + 0.5 * 0.8)
    assert weighted_scores(["x"], ["x"]) == (1.0, 1.0, 1.0)


class TestTables:
    def test_linguistic_table_marks_missing(self, metrics):
        table = linguistic_metric_table(metrics, make_manifest())
        assert list(table["profile"]) == ["limited_hl", "proficient_hl"]
        limited = table.set_index("profile").loc["limited_hl"]
        assert limited["reading_level"] == pytest.approx(3.0)
        proficient = table.set_index("profile").loc["proficient_hl"]
        assert proficient["reading_level"] == pytest.approx(11.0)
        assert proficient["depression_score"] == MISSING

    def test_unobserved_cell_gets_missing_row(self, metrics):
        table = intersection_table(metrics, make_manifest())
        assert len(table) == len(CELLS)
        empty = table[table["linguistic"] == "functional_hl"].iloc[0]
        assert empty["conversations"] == 0
        assert empty["reading_level"] == MISSING and empty["toxicity"] == MISSING

    def test_recommendations(self, metrics):
        reference = {"p0": "drug_a", "p1": "drug_b"}
        table = recommendation_table(metrics, make_manifest(), reference).set_index("linguistic")
        assert table.loc["proficient_hl", "f1"] == pytest.approx(1.0)
        assert table.loc["limited_hl", "recall"] == pytest.approx(0.5)
        assert table.loc["functional_hl", "precision"] == MISSING
        partial = recommendation_table(metrics, make_manifest(), {"p0": "drug_a"}).set_index("linguistic")
        assert partial.loc["limited_hl", "unreferenced"] == 1

    def test_pooled_retrieval(self, metrics):
        recall = recall_table(metrics).set_index("metric")
        assert recall.loc["reference_concepts", "overall"] == 16
        assert recall.loc["recall_pct", "overall"] == pytest.approx(75.0)
        assert recall.loc["recall_pct", "procedure"] == MISSING
        ranks = rank_table(metrics).set_index("metric")
        assert ranks.loc["rank1_pct", "value"] == pytest.approx(50.0)
        assert ranks.loc["reference_concepts", "value"] == 16

    def test_judge_labels_by_profile(self):
        manifest = make_manifest()
        judged = AnnotationSet(items=[
            AnnotationItem(conversation="p0__limited_hl__structured_cooperative", turn=1, key="1.1",
                           annotator="judge", label="ACCURATE"),
            AnnotationItem(conversation="p1__limited_hl__structured_cooperative", turn=2, key="2.1",
                           annotator="judge", label="INACCURATE"),
        ])
        table = judge_label_table(judged, manifest).set_index("profile")
        assert table.loc["limited_hl", "ACCURATE"] == 1
        assert table.loc["limited_hl", "INACCURATE"] == 1
        assert table.loc["proficient_hl", "UNSUPPORTED"] == 0


class TestEngine:
    def test_build_and_export(self, tmp_path, metrics):
        bundle = AgreementBundle(medical=[AgreementReport(annotator_a="a", annotator_b="b", n_items=3,
                                                          kappa=0.5, micro_f1=0.66)])
        engine = ReportEngine(top_n=20)
        report = engine.build(make_manifest(), metrics, {"p0": "drug_a", "p1": "drug_b"}, agreement=bundle)
        assert {"agreement", "recall", "ranks", "recommendations", "intersection"} <= set(report)
        assert all(isinstance(frame, pd.DataFrame) for frame in report.values())
        paths = engine.export(report, tmp_path, meta={"seed": 0})
        assert (tmp_path / "recall.csv") in paths
        stored = load_report(tmp_path / "report.json")
        assert stored["meta"] == {"seed": 0}
        assert diff_reports(stored, report_records(report, {"seed": 0})) == []

    def test_empty_manifest(self, metrics):
        empty = ExperimentManifest(design_id="t", seed=0, toolkit_version="test")
        with pytest.raises(ReportError):
            ReportEngine().build(empty, metrics, {})

    def test_records_are_json_safe(self, metrics):
        report = {"t": pd.DataFrame([{"x": float("nan"), "y": MISSING}])}
        records = report_records(report)
        assert json.loads(json.dumps(records))["tables"]["t"] == [{"x": None, "y": MISSING}]


class TestDiff:
    def test_tolerance_and_changes(self):
        stored = {"tables": {"t": [{"a": 1.0, "b": "x"}], "only": []}}
        recomputed = {"tables": {"t": [{"a": 1.0 + 1e-12, "b": "y"}]}}
        diffs = diff_reports(stored, recomputed)
        assert "t[0].b: stored 'x', recomputed 'y'" in diffs
        assert any(d.startswith("only: present only in stored") for d in diffs)
        assert not any(".a:" in d for d in diffs)

    def test_row_count_mismatch(self):
        diffs = diff_reports({"tables": {"t": [{}]}}, {"tables": {"t": []}})
        assert diffs == ["t: 1 rows stored, 0 recomputed"]


class TestReferencePolicy:
    def test_load(self, tmp_path):
        path = tmp_path / "policy.csv"
        path.write_text("profile_id,recommendation\np0, drug_a\n", encoding="utf-8")
        assert load_reference_policy(path) == {"p0": "drug_a"}

    def test_bad_header(self, tmp_path):
        path = tmp_path / "policy.csv"
        path.write_text("id,drug\np0,drug_a\n", encoding="utf-8")
        with pytest.raises(ReportError):
            load_reference_policy(path)
        with pytest.raises(ReportError):
            load_reference_policy(tmp_path / "none.csv")
