import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from core.errors import AgreementError, AlignmentError, AnnotationFormatError, PortError
from agreement import (
    AnnotationItem,
    AnnotationSet,
    AnnotationStatus,
    DEFAULT_TEMPLATE,
    accuracy,
    adjudicate,
    agreement_report,
    align,
    answer_key_annotations,
    cohens_kappa,
    compute_agreement,
    confusion_matrix,
    judge_annotate,
    kappa_from_counts,
    load_agreement,
    load_template,
    micro_f1,
    paired_bootstrap_kappa,
    parse_judge_reply,
    read_annotations,
    render_judge_prompt,
    simulate_annotator,
    write_agreement,
    write_annotations,
    write_resolution_template,
)
from orchestrator import ConversationLimits, run_conversation
from persona import PersonaPromptSpec, load_behavioral, load_linguistic
from plugins.ports import DrugFeatureTable, StubDecisionAid, StubPatient
from plugins.ports.stub_judge import AnswerKeyJudge
from profilegen import GenConfig, generate_profiles

LABELS = ["ACCURATE", "INACCURATE", "UNSUPPORTED"]

label_vectors = st.integers(min_value=1, max_value=40).flatmap(
    lambda n: st.tuples(
        st.lists(st.sampled_from(LABELS), min_size=n, max_size=n),
        st.lists(st.sampled_from(LABELS), min_size=n, max_size=n),
    )
)


def brute_kappa(a, b):
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    ca, cb = Counter(a), Counter(b)
    p_e = sum(ca[k] * cb[k] for k in set(a) | set(b)) / (n * n)
    return None if p_e == 1.0 else (p_o - p_e) / (1 - p_e)


def item(conversation, key, label, annotator="a", turn=1, **kwargs):
    return AnnotationItem(conversation=conversation, turn=turn, key=key, annotator=annotator, label=label, **kwargs)


def make_set(labels, annotator, conversation="c1"):
    return AnnotationSet(items=[item(conversation, f"1.{i}", label, annotator) for i, label in enumerate(labels)])


class TestStats:
    @given(label_vectors)
    def test_kappa_matches_contingency_formula(self, vectors):
        a, b = vectors
        expected = brute_kappa(a, b)
        value = cohens_kappa(a, b)
        if expected is None:
            assert value is None
        else:
            assert value == pytest.approx(expected, abs=1e-9)
            assert cohens_kappa(b, a) == pytest.approx(value, abs=1e-9)

    @given(label_vectors)
    def test_kappa_invariant_under_relabeling(self, vectors):
        a, b = vectors
        rename = {"ACCURATE": "UNSUPPORTED", "INACCURATE": "ACCURATE", "UNSUPPORTED": "INACCURATE"}
        value = cohens_kappa(a, b)
        renamed = cohens_kappa([rename[x] for x in a], [rename[x] for x in b])
        if value is None:
            assert renamed is None
        else:
            assert renamed == pytest.approx(value, abs=1e-9)

    @given(label_vectors)
    def test_micro_f1_is_accuracy(self, vectors):
        a, b = vectors
        assert micro_f1(a, b) == pytest.approx(accuracy(a, b))

    @given(label_vectors)
    def test_kappa_from_counts_agrees(self, vectors):
        a, b = vectors
        table = np.array(confusion_matrix(a, b, LABELS))
        assert table.sum() == len(a)
        value = float(kappa_from_counts(table))
        expected = cohens_kappa(a, b)
        if expected is None:
            assert np.isnan(value)
        else:
            assert value == pytest.approx(expected, abs=1e-9)

    def test_single_class_is_undefined(self):
        assert cohens_kappa(["ACCURATE"] * 4, ["ACCURATE"] * 4) is None
        assert cohens_kappa(["ACCURATE"] * 4, ["INACCURATE"] * 4) == pytest.approx(0.0)

    def test_confusion_rows_are_first_source(self):
        table = confusion_matrix(["ACCURATE", "ACCURATE", "INACCURATE"], ["ACCURATE", "INACCURATE", "INACCURATE"], LABELS)
        assert table == [[1, 1, 0], [0, 1, 0], [0, 0, 0]]

    def test_align_lists_orphans(self):
        keys, a, b = align({"x": "ACCURATE", "y": "INACCURATE"}, {"y": "ACCURATE", "x": "ACCURATE"})
        assert keys == ["x", "y"] and a == ["ACCURATE", "INACCURATE"] and b == ["ACCURATE", "ACCURATE"]
        with pytest.raises(AlignmentError) as info:
            align({"x": "ACCURATE", "y": "ACCURATE"}, {"x": "ACCURATE", "z": "ACCURATE"})
        assert info.value.only_a == ["y"] and info.value.only_b == ["z"]

    def test_empty_vectors(self):
        with pytest.raises(AgreementError):
            cohens_kappa([], [])


class TestBootstrap:
    A = ["ACCURATE", "INACCURATE", "UNSUPPORTED", "ACCURATE", "ACCURATE", "INACCURATE"] * 5
    B = ["ACCURATE", "INACCURATE", "ACCURATE", "ACCURATE", "UNSUPPORTED", "INACCURATE"] * 5
    C = ["ACCURATE", "ACCURATE", "UNSUPPORTED", "INACCURATE", "ACCURATE", "ACCURATE"] * 5

    def test_identical_comparators(self):
        result = paired_bootstrap_kappa(self.A, self.B, self.B, resamples=200, seed=1)
        assert result.delta == 0.0
        assert result.p_value == 1.0
        assert result.unit == "item"

    def test_observed_delta_and_determinism(self):
        first = paired_bootstrap_kappa(self.A, self.B, self.C, resamples=300, seed=4)
        second = paired_bootstrap_kappa(self.A, self.B, self.C, resamples=300, seed=4)
        assert first == second
        assert first.kappa_ab == pytest.approx(cohens_kappa(self.A, self.B))
        assert first.kappa_ac == pytest.approx(cohens_kappa(self.A, self.C))
        assert first.delta == pytest.approx(first.kappa_ab - first.kappa_ac)
        assert 0.0 <= first.p_value <= 1.0

    def test_cluster_unit(self):
        clusters = [f"c{i // 6}" for i in range(len(self.A))]
        result = paired_bootstrap_kappa(self.A, self.B, self.C, resamples=100, seed=2, clusters=clusters)
        assert result.unit == "conversation"
        with pytest.raises(AgreementError):
            paired_bootstrap_kappa(self.A, self.B, self.C, resamples=10, clusters=clusters[:-1])

    def test_invalid_inputs(self):
        single = ["ACCURATE"] * 4
        with pytest.raises(AgreementError):
            paired_bootstrap_kappa(single, single, single, resamples=10)
        with pytest.raises(AgreementError):
            paired_bootstrap_kappa(self.A, self.B, self.C, resamples=0)


class TestAnnotations:
    def test_item_validation(self):
        with pytest.raises(ValidationError):
            item("c1", "1.1", "MAYBE")
        with pytest.raises(ValidationError):
            item("c1", "1.1", None)
        assert item("c1", "profile:linguistic", "limited_hl").label == "limited_hl"
        abstain = item("c1", "1.1", "ACCURATE", status=AnnotationStatus.ABSTAIN)
        assert abstain.label is None and not abstain.labeled

    def test_duplicate_judgment_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationSet(items=[item("c1", "1.1", "ACCURATE"), item("c1", "1.1", "INACCURATE")])

    def test_file_round_trip(self, tmp_path):
        annotations = AnnotationSet(items=[
            item("c2", "2.1", "INACCURATE"),
            item("c1", "1.1", "ACCURATE"),
            item("c1", "1.2", None, status=AnnotationStatus.ABSTAIN),
            item("c1", "free:sleeps_badly", "UNSUPPORTED"),
        ])
        path = write_annotations(annotations, tmp_path / "a.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "conversation,turn,key,annotator,label"
        assert lines[1].startswith("c1,1,1.1")
        assert "ABSTAIN" in path.read_text(encoding="utf-8")
        loaded = read_annotations(path)
        assert sorted(loaded.labels().items()) == sorted(annotations.labels().items())
        assert loaded.abstained() == [("c1", 1, "1.2")]

    @pytest.mark.parametrize("body", [
        "conversation,turn,key,annotator\nc1,1,1.1,a\n",
        "conversation,turn,key,annotator,label\nc1,one,1.1,a,ACCURATE\n",
        "conversation,turn,key,annotator,label\nc1,1,1.1,a,MAYBE\n",
    ])
    def test_bad_rows(self, tmp_path, body):
        path = tmp_path / "bad.csv"
        path.write_text(body, encoding="utf-8")
        with pytest.raises(AnnotationFormatError, match="row 2"):
            read_annotations(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(AnnotationFormatError):
            read_annotations(tmp_path / "none.csv")


class TestAdjudication:
    def test_agreements_pass_disagreements_listed(self):
        a = make_set(["ACCURATE", "INACCURATE", "UNSUPPORTED"], "a")
        b = make_set(["ACCURATE", "ACCURATE", "UNSUPPORTED"], "b")
        result = adjudicate(a, b)
        assert not result.complete
        assert [(d.key, d.label_a, d.label_b) for d in result.disagreements] == [("1.1", "INACCURATE", "ACCURATE")]
        assert len(result.consensus.items) == 2

    def test_resolution_completes(self, tmp_path):
        a = make_set(["ACCURATE", "INACCURATE"], "a")
        b = make_set(["ACCURATE", "ACCURATE"], "b")
        open_items = adjudicate(a, b).disagreements
        template = write_resolution_template(open_items, tmp_path / "resolve.csv")
        text = template.read_text(encoding="utf-8").replace("consensus,,", "consensus,INACCURATE,")
        template.write_text(text, encoding="utf-8")
        result = adjudicate(a, b, resolution=read_annotations(template))
        assert result.complete and result.resolved == 1
        assert result.consensus.labels()[("c1", 1, "1.1")] == "INACCURATE"

    def test_abstention_is_a_disagreement(self):
        a = make_set(["ACCURATE"], "a")
        b = AnnotationSet(items=[item("c1", "1.0", None, "b", status=AnnotationStatus.ABSTAIN)])
        assert len(adjudicate(a, b).disagreements) == 1

    def test_different_items(self):
        with pytest.raises(AlignmentError):
            adjudicate(make_set(["ACCURATE"], "a"), make_set(["ACCURATE", "ACCURATE"], "b"))

    def test_resolution_for_unknown_item(self):
        a = make_set(["ACCURATE"], "a")
        resolution = AnnotationSet(items=[item("c9", "9.9", "ACCURATE", "consensus")])
        with pytest.raises(AgreementError):
            adjudicate(a, make_set(["INACCURATE"], "b"), resolution=resolution)


class TestReports:
    def test_free_mentions_and_abstentions_excluded(self):
        a = AnnotationSet(items=[
            item("c1", "1.1", "ACCURATE"), item("c1", "1.2", "INACCURATE"),
            item("c1", "1.3", None, status=AnnotationStatus.ABSTAIN), item("c1", "free:x", "UNSUPPORTED"),
        ])
        b = AnnotationSet(items=[
            item("c1", "1.1", "ACCURATE", "b"), item("c1", "1.2", "ACCURATE", "b"), item("c1", "1.3", "ACCURATE", "b"),
        ])
        report = agreement_report(a, b, "a", "b")
        assert report.n_items == 2
        assert report.abstained == 1
        assert report.excluded_free_mentions == 1
        assert report.accuracy == report.micro_f1 == 0.5
        assert sum(map(sum, report.confusion)) == 2

    def test_excluded_conversations(self):
        a = AnnotationSet(items=[*make_set(["ACCURATE", "INACCURATE"], "a").items,
                                 *make_set(["ACCURATE"], "a", conversation="c2").items])
        b = make_set(["ACCURATE", "INACCURATE"], "b")
        report = agreement_report(a, b, "a", "b", excluded_conversations=["c2"])
        assert report.n_items == 2 and report.excluded_conversations == 1
        assert report.kappa == pytest.approx(1.0)


@pytest.fixture(scope="module")
def conversations(cohort, ontology, lexicon, embedder):
    cfg = GenConfig(outcome=cohort.most_treated_outcome(), top_k=60, rng_seed=51)
    profiles = generate_profiles(cohort, cfg, count=3, show_progress=False).profiles
    aid = StubDecisionAid(ontology, lexicon, embedder, DrugFeatureTable.from_cohort(cohort))
    result = []
    for profile in profiles:
        for linguistic in ("limited_hl", "proficient_hl"):
            spec = PersonaPromptSpec(
                medical=profile,
                linguistic=load_linguistic(linguistic),
                behavioral=load_behavioral("structured_cooperative"),
            )
            result.append(run_conversation(spec, StubPatient(spec, seed=3, ontology=ontology), aid,
                                           ConversationLimits(), conversation_id=f"{profile.profile_id}__{linguistic}",
                                           seed=3))
    return result


@pytest.fixture(scope="module")
def perturbed(conversations):
    first = conversations[0]
    return {first.profile_id: list(first.profile.fact_map())}


class TestJudge:
    def test_reply_parsing(self):
        raw = '```json\n{"labels": {"1.1": "accurate", "2.1": "WRONG"}, "free_mentions": ["naps", 3, ""]}\n```'
        labels, mentions = parse_judge_reply(raw, ["1.1", "2.1", "3.1"])
        assert labels == {"1.1": "ACCURATE", "2.1": None, "3.1": None}
        assert mentions == ["naps"]
        assert parse_judge_reply("not json", ["1.1"]) == ({"1.1": None}, [])

    def test_template(self, tmp_path, conversations):
        assert load_template() == DEFAULT_TEMPLATE
        profile = conversations[0].profile
        prompt = render_judge_prompt(DEFAULT_TEMPLATE, profile, 2, "I take pills.", ["1.1", "2.1"])
        assert f"PROFILE_ID: {profile.profile_id}" in prompt
        assert 'ITEMS: ["1.1", "2.1"]' in prompt
        broken = tmp_path / "judge.txt"
        broken.write_text("only {profile}", encoding="utf-8")
        with pytest.raises(AgreementError):
            load_template(broken)

    def test_answer_key_judge_reproduces_answer_key(self, conversations, perturbed):
        references = {c.profile_id: c.profile for c in conversations}
        key = answer_key_annotations(conversations, perturbed, references)
        indices = {pid: list(p.fact_map()) for pid, p in references.items()}
        judged, failures = judge_annotate(conversations, references, AnswerKeyJudge(perturbed, indices),
                                          workers=2, show_progress=False)
        assert not failures
        assert judged.labels() == key.medical().labels()
        target = conversations[0].profile_id
        for (conversation, _, _), label in judged.labels().items():
            if conversation.startswith(target):
                assert label in ("INACCURATE", "UNSUPPORTED")
        assert {i.key for i in key.items if i.turn == 0} == {"profile:linguistic", "profile:behavioral"}

    def test_judge_failure_drops_conversation(self, conversations):
        class Down:
            name = "down"
            concurrent_safe = True

            def request(self, system_prompt, messages):
                raise PortError("503")

        judged, failures = judge_annotate(conversations[:2], {}, Down(), show_progress=False)
        assert not judged.items
        assert [f.conversation for f in failures] == sorted(c.conversation_id for c in conversations[:2])

    def test_simulated_annotator(self, conversations, perturbed):
        key = answer_key_annotations(conversations, perturbed)
        exact = simulate_annotator(key, "copy", noise=0.0)
        assert exact.labels() == key.labels()
        noisy = simulate_annotator(key, "noisy", noise=0.5, seed=3)
        assert noisy == simulate_annotator(key, "noisy", noise=0.5, seed=3)
        assert noisy.labels().keys() == key.labels().keys()
        choices = {i.label for i in key.items if i.key == "profile:linguistic"}
        assert {i.label for i in noisy.items if i.key == "profile:linguistic"} <= choices
        with pytest.raises(AgreementError):
            simulate_annotator(key, "bad", noise=1.5)


def test_compute_agreement_bundle(tmp_path, conversations, perturbed):
    references = {c.profile_id: c.profile for c in conversations}
    key = answer_key_annotations(conversations, perturbed, references)
    first = simulate_annotator(key, "annotator_1", noise=0.1, seed=1)
    second = simulate_annotator(key, "annotator_2", noise=0.1, seed=2)
    indices = {pid: list(p.fact_map()) for pid, p in references.items()}
    judged, failures = judge_annotate(conversations, references, AnswerKeyJudge(perturbed, indices),
                                      show_progress=False)
    first_id = conversations[0].conversation_id
    items = {(first_id, index) for index in perturbed[conversations[0].profile_id]}
    bundle = compute_agreement(first, second, judge=judged, judge_failures=failures, resamples=200, seed=0,
                               perturbed_items=items)
    human = bundle.report("annotator_1", "annotator_2")
    assert human is not None and human.n_items > 0
    assert bundle.report("judge", "annotator_1") is not None
    assert {r.scope for r in bundle.profile} == {"profile:linguistic", "profile:behavioral"}
    assert {d.annotator for d in bundle.distributions} == {"annotator_1", "annotator_2", "judge"}
    if bundle.consensus_complete:
        assert bundle.report("judge", "consensus") is not None
    else:
        assert bundle.unresolved
    path = write_agreement(bundle, tmp_path / "agreement.json")
    assert json.loads(path.read_text(encoding="utf-8"))["medical"]
    assert load_agreement(path) == bundle
