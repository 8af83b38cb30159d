import json
import math

import pytest

from cohort import (
    CohortStats,
    OutcomeFlag,
    PatientRecord,
    SyntheticWorldGenerator,
    demographic_distribution,
    load_cohort,
    rank_top_k_predictors,
    risk_ratio,
    write_cohort,
)
from core.errors import CohortIngestError, DemographicError
from core.models import ConceptCode, DemographicKind, Vocabulary
from ontology import Concept, Ontology

S = ConceptCode("s", Vocabulary.DIAGNOSIS)
V = ConceptCode("v", Vocabulary.MEDICATION)
W = ConceptCode("w", Vocabulary.PROCEDURE)
O = ConceptCode("resp", Vocabulary.OUTCOME)


def tiny_ontology() -> Ontology:
    return Ontology([
        Concept(S, "Seed condition"), Concept(V, "Value drug"), Concept(W, "Other procedure"), Concept(O, "Response"),
    ])


def patient(i: int, concepts, responded: bool) -> PatientRecord:
    return PatientRecord(patient_id=f"p{i:02d}", concepts=concepts,
                         outcomes=[OutcomeFlag(code=O, responded=responded)])


@pytest.fixture
def tiny():
    responded = {0, 1, 2, 3, 8}
    records = []
    for i in range(10):
        concepts = [S, V] if i < 6 else ([S] if i < 8 else [W])
        records.append(patient(i, concepts, i in responded))
    return tiny_ontology(), records


def stats(tiny, min_support: int) -> CohortStats:
    ontology, records = tiny
    return CohortStats(records, ontology, min_support=min_support)


def response_rate(cohort: CohortStats, mask, outcome: ConceptCode = O) -> float:
    held = mask & cohort.treated(outcome)
    return float((held & cohort.responded(outcome)).sum()) / int(held.sum())


class TestRiskRatio:
    def test_pair_risk_ratio(self, tiny):
        cohort = stats(tiny, min_support=5)
        # p(resp | s, v) = 4/6, p(resp | s) = 4/8
        assert risk_ratio(cohort, S, V, O) == pytest.approx((4 / 6) / (4 / 8))

    def test_doubled_response(self):
        # 8 of 10 holding {s, v} respond; 12 of 30 holding s respond
        records = [patient(i, [S, V], i < 8) for i in range(10)]
        records += [patient(10 + i, [S], i < 4) for i in range(20)]
        cohort = CohortStats(records, tiny_ontology(), min_support=5)
        assert cohort.risk_ratio(S, V, O) == pytest.approx(2.0, abs=1e-12)

    def test_independence_gives_unity(self):
        records = [patient(i, [S, V], i % 2 == 0) for i in range(10)]
        records += [patient(10 + i, [S], i % 2 == 0) for i in range(10)]
        cohort = CohortStats(records, tiny_ontology(), min_support=5)
        assert cohort.risk_ratio(S, V, O) == pytest.approx(1.0)

    def test_undefined_below_support(self, tiny):
        assert stats(tiny, min_support=7).risk_ratio(S, V, O) is None
        assert stats(tiny, min_support=1).risk_ratio(W, V, O) is None

    def test_undefined_without_responders(self, tiny):
        ontology, records = tiny
        silent = [r.model_copy(update={"outcomes": [OutcomeFlag(code=O, responded=False)]}) for r in records]
        assert CohortStats(silent, ontology, min_support=1).risk_ratio(S, V, O) is None

    def test_smoothed_log_rr(self, tiny):
        cohort = stats(tiny, min_support=5)
        # with v: 4 of 6 respond; without v: 1 of 4
        expected = math.log(((4 + 1) / (6 + 2)) / ((1 + 1) / (4 + 2)))
        assert cohort.smoothed_log_rr(V, O) == pytest.approx(expected)

    def test_base_rates(self, tiny):
        cohort = stats(tiny, min_support=5)
        assert cohort.base_rate(O) == pytest.approx(0.5)
        assert cohort.smoothed_base_rate(O) == pytest.approx(6 / 12)
        assert cohort.base_rate(ConceptCode("other", Vocabulary.OUTCOME)) is None

    def test_ratio_times_base_is_joint_rate(self, cohort):
        outcome = cohort.most_treated_outcome()
        features = sorted(
            (c for c in cohort.concepts() if c.vocabulary != Vocabulary.DEMOGRAPHIC),
            key=lambda c: (-cohort.support(c), c),
        )[:15]
        checked = 0
        for s in features:
            for v in features:
                rr = cohort.risk_ratio(s, v, outcome)
                if rr is None:
                    continue
                p_s = response_rate(cohort, cohort.has(s), outcome)
                p_sv = response_rate(cohort, cohort.has(s) & cohort.has(v), outcome)
                assert rr * p_s == pytest.approx(p_sv, abs=1e-12)
                checked += 1
        assert checked > 0


def test_top_k_predictors_sorted_and_feature_only(cohort):
    outcome = cohort.most_treated_outcome()
    ranked = rank_top_k_predictors(cohort, outcome, 20)
    scores = cohort.predictor_scores(outcome)
    assert len(ranked) <= 20
    assert all(c.vocabulary in (Vocabulary.DIAGNOSIS, Vocabulary.MEDICATION, Vocabulary.PROCEDURE) for c in ranked)
    values = [scores[c] for c in ranked]
    assert values == sorted(values, reverse=True)


def test_demographic_distribution(ontology, records):
    dist = demographic_distribution(records, DemographicKind.GENDER, ontology)
    assert sum(dist.counts) == len(records)
    assert dist.probabilities.sum() == pytest.approx(1.0)


def test_demographic_distribution_needs_one_value(ontology, records):
    stripped = records[0].model_copy(update={"concepts": [
        c for c in records[0].concepts if ontology.demographic_kind(c) != DemographicKind.AGE_BIN
    ]})
    with pytest.raises(DemographicError):
        demographic_distribution([stripped], DemographicKind.AGE_BIN, ontology)


class TestIngest:
    def test_round_trip(self, tmp_path, ontology, records):
        path = tmp_path / "cohort.jsonl"
        write_cohort(records[:50], path)
        loaded = load_cohort(path, ontology)
        assert [r.patient_id for r in loaded] == sorted(r.patient_id for r in records[:50])
        assert {c for c in loaded[0].concepts} == set(sorted(records[:50], key=lambda r: r.patient_id)[0].concepts)

    @pytest.mark.parametrize("row,fragment", [
        ({"concepts": []}, "patient_id"),
        ({"patient_id": "x", "concepts": ["diagnosis:nope"]}, "unknown concept"),
        ({"patient_id": "x", "concepts": ["diagnosis:s", "diagnosis:s"]}, "duplicate"),
        ({"patient_id": "x", "concepts": ["outcome:resp"]}, "outcome concept"),
        ({"patient_id": "x", "concepts": ["diagnosis:s"], "outcomes": {"diagnosis:s": True}}, "not an outcome"),
        ({"patient_id": "x", "concepts": []}, "no concepts"),
        ({"patient_id": "x"}, "no concepts"),
    ])
    def test_bad_rows(self, tmp_path, tiny, row, fragment):
        path = tmp_path / "bad.jsonl"
        good = json.dumps({"patient_id": "ok", "concepts": ["diagnosis:s"]})
        path.write_text(good + "\n" + json.dumps(row) + "\n", encoding="utf-8")
        with pytest.raises(CohortIngestError) as info:
            load_cohort(path, tiny[0])
        assert info.value.row == 2
        assert fragment in str(info.value)

    def test_empty_file(self, tmp_path, tiny):
        path = tmp_path / "empty.jsonl"
        path.write_text("\n", encoding="utf-8")
        with pytest.raises(CohortIngestError, match="empty cohort"):
            load_cohort(path, tiny[0])

    def test_row_order_does_not_matter(self, tmp_path, ontology, records):
        forward, backward = tmp_path / "forward.jsonl", tmp_path / "backward.jsonl"
        rows = [json.dumps(r.to_row()) for r in records[:200]]
        forward.write_text("\n".join(rows) + "\n", encoding="utf-8")
        backward.write_text("\n".join(reversed(rows)) + "\n", encoding="utf-8")
        a = CohortStats(load_cohort(forward, ontology), ontology, min_support=3)
        b = CohortStats(load_cohort(backward, ontology), ontology, min_support=3)
        assert a.concepts() == b.concepts() and a.outcomes() == b.outcomes()
        assert all(a.support(c) == b.support(c) for c in a.concepts())
        outcome = a.most_treated_outcome()
        assert a.predictor_scores(outcome) == b.predictor_scores(outcome)
        top = rank_top_k_predictors(a, outcome, 10)
        assert top == rank_top_k_predictors(b, outcome, 10)
        assert [a.risk_ratio(s, v, outcome) for s in top for v in top] == \
            [b.risk_ratio(s, v, outcome) for s in top for v in top]

    def test_duplicate_patient(self, tmp_path, tiny):
        path = tmp_path / "dup.jsonl"
        row = json.dumps({"patient_id": "a", "concepts": ["diagnosis:s"]})
        path.write_text(f"{row}\n{row}\n", encoding="utf-8")
        with pytest.raises(CohortIngestError):
            load_cohort(path, tiny[0])


def test_synthetic_world_is_deterministic():
    first = SyntheticWorldGenerator(n_patients=80, n_concepts=90, seed=3).generate()
    second = SyntheticWorldGenerator(n_patients=80, n_concepts=90, seed=3).generate()
    assert first[0].codes() == second[0].codes()
    assert [r.to_row() for r in first[1]] == [r.to_row() for r in second[1]]


def test_synthetic_patients_have_one_of_each_demographic(ontology, records):
    for record in records[:100]:
        kinds = [ontology.demographic_kind(c) for c in record.concepts]
        assert kinds.count(DemographicKind.GENDER) == 1
        assert kinds.count(DemographicKind.AGE_BIN) == 1
        assert record.outcomes
