import numpy as np
import pytest
from hypothesis import given, strategies as st

from core.errors import PortError
from core.models import ConceptCode, Vocabulary
from metrics import (
    MetricPorts,
    aggregate_cells,
    concept_recall,
    count_syllables,
    evaluate_conversation,
    evaluate_conversations,
    export_embeddings,
    fkgl,
    fkgl_text,
    load_metric_report,
    medical_term_count,
    on_topic_similarity,
    pool_rank_breakdowns,
    pool_recall,
    rank_items,
    response_length,
    retrieval_rank_metrics,
    split_sentences,
    turn_mean_score,
    write_metric_report,
)
from orchestrator import ConversationLimits, run_conversation
from persona import PersonaPromptSpec, load_behavioral, load_linguistic
from plugins.ports import (
    DepressionKeywordClassifier,
    DrugFeatureTable,
    RetrievalTrace,
    StubDecisionAid,
    StubPatient,
    ToxicityKeywordClassifier,
)
from profilegen import GenConfig, generate_profiles


def dx(cid: str) -> ConceptCode:
    return ConceptCode(cid, Vocabulary.DIAGNOSIS)


def med(cid: str) -> ConceptCode:
    return ConceptCode(cid, Vocabulary.MEDICATION)


class TestReadability:
    def test_golden_value(self):
        assert fkgl_text("The cat sat.") == pytest.approx(-2.62, abs=0.01)

    @pytest.mark.parametrize("word,expected", [
        ("the", 1), ("cat", 1), ("table", 2), ("make", 1), ("boxes", 2),
        ("jumped", 1), ("wanted", 2), ("hypertension", 4), ("rhythm", 1), ("123", 1),
    ])
    def test_syllables(self, word, expected):
        assert count_syllables(word) == expected

    def test_sentences(self):
        assert split_sentences("Dr. Smith is here. He left!") == ["Dr. Smith is here.", "He left!"]
        assert split_sentences("no punctuation at all") == ["no punctuation at all"]
        assert split_sentences("Wait... what?! Fine") == ["Wait...", "what?!", "Fine"]

    def test_mean_over_turns(self):
        texts = ["The cat sat.", "", "The cat sat. The cat sat."]
        assert fkgl(texts) == pytest.approx(-2.62, abs=0.01)
        assert fkgl(["", "  "]) is None

    def test_register_orders_grade(self):
        limited = "Uh, I'm sad. Also pills. I don't know."
        proficient = ("My documented history includes generalized anxiety disorder and hypertension, "
                      "which my physicians have been monitoring comprehensively.")
        assert fkgl_text(limited) < fkgl_text(proficient)

    def test_textstat_backend(self):
        pytest.importorskip("textstat")
        value = fkgl(["The cat sat on the mat."], backend="textstat")
        assert isinstance(value, float)


class TestLinguistic:
    def test_length_and_terms(self, lexicon, ontology):
        name = ontology.concepts(Vocabulary.DIAGNOSIS)[3].display_name
        turns = [f"I have {name}.", "Nothing else."]
        assert medical_term_count(turns, lexicon) == pytest.approx(0.5)
        assert response_length(["a b c", "d"]) == pytest.approx(2.0)
        assert response_length([]) is None

    def test_classifier_failure_withholds_mean(self):
        class Flaky:
            label = "toxicity"

            def score(self, text):
                if "boom" in text:
                    raise PortError("timeout")
                return 0.5

        assert turn_mean_score(["a", "b"], Flaky()).value == 0.5
        partial = turn_mean_score(["a", "boom"], Flaky())
        assert partial.value is None and partial.failed == 1 and not partial.complete

    def test_keyword_classifiers_separate_registers(self):
        depression = DepressionKeywordClassifier()
        toxicity = ToxicityKeywordClassifier()
        assert depression.score("I feel hopeless and tired, nothing helps") > depression.score("I feel fine today")
        assert toxicity.score("This is stupid and a waste of time") > toxicity.score("Thank you for asking")

    def test_zero_norm_pairs_skipped(self, embedder):
        result = on_topic_similarity([("How are you?", "Fine thanks"), ("Age?", "")], embedder)
        assert result.pairs == 1 and result.skipped == 1
        assert -1.0 <= result.value <= 1.0


class TestRetrieval:
    def test_recall_partition(self):
        reference = [dx("a"), dx("b"), med("m")]
        report = concept_recall(reference, [dx("a"), med("m"), med("z")])
        assert report.retrieved + report.missed == report.reference_count == 3
        assert report.recall == pytest.approx(2 / 3)
        assert report.by_vocabulary == {"diagnosis": 0.5, "medication": 1.0, "procedure": None}
        assert report.extra_concepts_outside_reference == 1

    def test_empty_reference(self):
        assert concept_recall([], [dx("a")]).recall is None

    def test_rank_buckets(self):
        filler = [dx(f"f{i}") for i in range(30)]
        items = [
            (dx("a"), [dx("a")] + filler),
            (dx("b"), filler[:2] + [dx("b")]),
            (dx("c"), filler[:24] + [dx("c")]),
            (dx("d"), filler),
        ]
        ranks = retrieval_rank_metrics(items, top_n=20)
        assert (ranks.rank1, ranks.beyond_rank1, ranks.within_top_n, ranks.not_retrieved) == (1, 2, 1, 1)
        assert ranks.mean_nontop1_rank == pytest.approx((3 + 25) / 2)
        assert ranks.within_top_n_of_non_rank1 == pytest.approx(0.5)

    @given(st.lists(st.one_of(st.none(), st.integers(min_value=1, max_value=40)), min_size=1, max_size=30))
    def test_rank_shares_sum_to_one(self, positions):
        items = []
        for i, position in enumerate(positions):
            target = dx(f"t{i}")
            others = [dx(f"o{j}") for j in range(40)]
            if position is not None:
                others.insert(position - 1, target)
            items.append((target, others))
        ranks = retrieval_rank_metrics(items)
        total = ranks.rank1_accuracy + ranks.beyond_rank1_share + ranks.not_retrieved_share
        assert total == pytest.approx(1.0)
        assert ranks.n_items == len(positions)

    def test_best_rank_across_traces(self):
        traces = [
            RetrievalTrace(turn=1, phrase="x", candidates=[dx("z"), dx("y"), dx("a")]),
            RetrievalTrace(turn=2, phrase="y", candidates=[dx("z"), dx("a")]),
        ]
        items = dict(rank_items([dx("a"), dx("q")], traces))
        assert items[dx("a")] == [dx("z"), dx("a")]
        assert items[dx("q")] == []

    def test_pooling(self):
        first = concept_recall([dx("a"), dx("b")], [dx("a")])
        second = concept_recall([dx("c")], [dx("c")])
        empty = concept_recall([], [])
        pooled, excluded = pool_recall([first, second, empty])
        assert pooled.recall == pytest.approx(2 / 3)
        assert excluded == 1
        a = retrieval_rank_metrics([(dx("a"), [dx("x"), dx("a")])])
        b = retrieval_rank_metrics([(dx("b"), [dx("x"), dx("y"), dx("z"), dx("b")]), (dx("c"), [dx("c")])])
        pooled_ranks = pool_rank_breakdowns([a, b])
        assert pooled_ranks.n_items == 3
        assert pooled_ranks.mean_nontop1_rank == pytest.approx(3.0)


@pytest.fixture(scope="module")
def conversations(cohort, ontology, lexicon, embedder):
    cfg = GenConfig(outcome=cohort.most_treated_outcome(), top_k=60, rng_seed=41)
    profiles = generate_profiles(cohort, cfg, count=2, show_progress=False).profiles
    aid = StubDecisionAid(ontology, lexicon, embedder, DrugFeatureTable.from_cohort(cohort))
    result = []
    for profile in profiles:
        for linguistic in ("limited_hl", "proficient_hl"):
            spec = PersonaPromptSpec(
                medical=profile,
                linguistic=load_linguistic(linguistic),
                behavioral=load_behavioral("structured_cooperative"),
            )
            cid = f"{profile.profile_id}__{linguistic}"
            result.append(run_conversation(spec, StubPatient(spec, seed=2, ontology=ontology), aid,
                                           ConversationLimits(), conversation_id=cid, seed=2))
    return result


@pytest.fixture(scope="module")
def ports(lexicon, embedder):
    return MetricPorts(lexicon, embedder, DepressionKeywordClassifier(), ToxicityKeywordClassifier())


class TestEvaluation:
    def test_conversation_metrics(self, conversations, ports):
        m = evaluate_conversation(conversations[0], ports)
        assert m.parse_failed_turns == 0
        assert m.n_turns == 5
        assert m.depression_complete and m.toxicity_complete
        recall = m.retrieval.recall
        assert recall.retrieved + recall.missed == recall.reference_count
        ranks = m.retrieval.ranks
        assert ranks.rank1 + ranks.beyond_rank1 + ranks.not_retrieved == ranks.n_items

    def test_profile_scope_covers_expressed(self, conversations, ports):
        expressed = evaluate_conversation(conversations[0], ports)
        profile = evaluate_conversation(conversations[0], ports, reference_scope="profile")
        assert profile.retrieval.recall.reference_count >= expressed.retrieval.recall.reference_count

    def test_limited_reads_easier_than_proficient(self, conversations, ports):
        report = evaluate_conversations(conversations, ports, show_progress=False)
        cells = {c.linguistic: c for c in report.cells}
        assert cells["limited_hl"].fkgl < cells["proficient_hl"].fkgl
        assert cells["limited_hl"].conversations == 2

    def test_cell_mean_ignores_undefined(self, conversations, ports):
        rows = evaluate_conversations(conversations, ports, show_progress=False).conversations
        rows[0] = rows[0].model_copy(update={"toxicity": None})
        cell = next(c for c in aggregate_cells(rows) if c.linguistic == rows[0].linguistic)
        assert cell.counts["toxicity"] == 1
        assert cell.toxicity == pytest.approx(next(r.toxicity for r in rows[1:] if r.linguistic == rows[0].linguistic))

    def test_report_files(self, tmp_path, conversations, ports, embedder):
        report = evaluate_conversations(conversations, ports, workers=2, show_progress=False)
        paths = write_metric_report(report, tmp_path)
        assert load_metric_report(tmp_path) == report
        header = paths["conversations_csv"].read_text(encoding="utf-8").splitlines()[0]
        assert header.startswith("conversation_id,profile_id,linguistic,behavioral")
        vec_path, label_path = export_embeddings(conversations, embedder, tmp_path)
        vectors = np.loadtxt(vec_path, delimiter="\t")
        labels = label_path.read_text(encoding="utf-8").splitlines()
        assert vectors.shape == (len(labels) - 1, embedder.dimension)
