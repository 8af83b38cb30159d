import threading
import time

import numpy as np
import pytest
import requests

from core.errors import PortError
from core.models import ConceptCode, Vocabulary
from plugins.ports import (
    NO_RECOMMENDATION,
    ChatMessage,
    DrugFeatureTable,
    HashEmbedder,
    HttpClassifier,
    HttpDecisionAid,
    IntakeStage,
    PortKind,
    PortRegistry,
    SingleFlight,
    StubDecisionAid,
    guard,
)


class FakeResponse:
    def __init__(self, payload, status=200):
        self.payload = payload
        self.status = status

    def raise_for_status(self):
        if self.status >= 400:
            raise requests.HTTPError(f"{self.status} error")

    def json(self):
        return self.payload


class TestRegistry:
    def test_bundled_ports_registered(self):
        assert {"hash", "openai"} <= set(PortRegistry.names(PortKind.EMBEDDING))
        assert {"depression_keyword", "toxicity_keyword", "http"} <= set(PortRegistry.names(PortKind.CLASSIFIER))
        assert "stub_judge" in PortRegistry.names(PortKind.CHAT)
        assert PortRegistry.info()["sut/stub"]["concurrent_safe"]

    def test_create_and_cache(self):
        embedder = PortRegistry.create(PortKind.EMBEDDING, "hash", dimension=16, seed=1)
        assert isinstance(embedder, HashEmbedder) and embedder.dimension == 16
        first = PortRegistry.get(PortKind.CLASSIFIER, "depression_keyword")
        assert PortRegistry.get(PortKind.CLASSIFIER, "depression_keyword") is first

    def test_unknown_port(self):
        with pytest.raises(KeyError, match="known"):
            PortRegistry.get_class(PortKind.EMBEDDING, "word2vec")

    def test_name_clash(self):
        class Impostor(HashEmbedder):
            pass

        with pytest.raises(ValueError):
            PortRegistry.register(Impostor)


class TestSingleFlight:
    def test_serializes_calls(self):
        class Counter:
            concurrent_safe = False

            def __init__(self):
                self.active = 0
                self.peak = 0

            def call(self):
                self.active += 1
                self.peak = max(self.peak, self.active)
                time.sleep(0.01)
                self.active -= 1

        port = Counter()
        wrapped = guard(port)
        assert isinstance(wrapped, SingleFlight) and wrapped.wrapped is port
        threads = [threading.Thread(target=wrapped.call) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert port.peak == 1
        assert wrapped.concurrent_safe is False

    def test_safe_ports_pass_through(self, embedder):
        assert guard(embedder) is embedder
        assert guard(None) is None


class TestHashEmbedder:
    def test_deterministic_unit_vectors(self):
        a = HashEmbedder(dimension=32, buckets=256, seed=3)
        b = HashEmbedder(dimension=32, buckets=256, seed=3)
        texts = ["Major depressive disorder", "Dysthymia", ""]
        va, vb = a.embed(texts), b.embed(texts)
        assert va.shape == (3, 32)
        np.testing.assert_array_equal(va, vb)
        assert np.linalg.norm(va[0]) == pytest.approx(1.0)
        assert np.linalg.norm(va[2]) == 0.0
        assert a.embed([]).shape == (0, 32)

    def test_similar_strings_are_closer(self):
        embedder = HashEmbedder(dimension=64, buckets=512, seed=5)
        base, near, far = embedder.embed(["depressive disorder", "depressive disorders", "knee replacement"])
        assert base @ near > base @ far


class TestHttpPorts:
    def test_decision_aid(self, monkeypatch):
        calls = []

        def post(session, url, json, timeout):
            calls.append((url, json))
            if url.endswith("next_question"):
                return FakeResponse({"stage": "illness_history", "utterance": "Any conditions?"})
            return FakeResponse({"recommendation": "outcome:resp_x", "utterance": "Try x."})

        monkeypatch.setattr(requests.Session, "post", post)
        aid = HttpDecisionAid(base_url="http://aid.local/", api_key="k")
        history = [ChatMessage("aid", "Hello"), ChatMessage("patient", "Hi")]
        question = aid.next_question(history)
        assert question.stage == IntakeStage.ILLNESS_HISTORY
        assert aid.recommend(history).recommendation == "outcome:resp_x"
        assert calls[0][0] == "http://aid.local/next_question"
        assert calls[0][1]["history"][1] == {"role": "patient", "content": "Hi"}

    @pytest.mark.parametrize("response", [
        FakeResponse({}, status=503),
        FakeResponse({"stage": "smalltalk", "utterance": "?"}),
    ])
    def test_decision_aid_failures(self, monkeypatch, response):
        monkeypatch.setattr(requests.Session, "post", lambda *args, **kwargs: response)
        with pytest.raises(PortError):
            HttpDecisionAid(base_url="http://aid.local").next_question([])

    def test_unconfigured(self, monkeypatch):
        monkeypatch.delenv("PATSIM_SUT_BASE_URL", raising=False)
        aid = HttpDecisionAid()
        assert not aid.is_configured()
        with pytest.raises(PortError):
            aid.intake([])

    @pytest.mark.parametrize("payload", [{"score": 1.5}, {"label": "x"}])
    def test_classifier_rejects_bad_scores(self, monkeypatch, payload):
        monkeypatch.setattr(requests.Session, "post", lambda *args, **kwargs: FakeResponse(payload))
        with pytest.raises(PortError):
            HttpClassifier(url="http://clf.local", label="toxicity").score("text")

    def test_classifier_score(self, monkeypatch):
        monkeypatch.setattr(requests.Session, "post", lambda *args, **kwargs: FakeResponse({"score": 0.25}))
        assert HttpClassifier(url="http://clf.local").score("text") == 0.25


class TestStubAid:
    def test_stage_order(self, ontology, lexicon, embedder):
        aid = StubDecisionAid(ontology, lexicon, embedder, DrugFeatureTable())
        history = []
        stages = []
        for _ in range(7):
            question = aid.next_question(history)
            stages.append(question.stage)
            history += [ChatMessage("aid", question.utterance), ChatMessage("patient", "ok")]
        assert stages[:6] == list(IntakeStage)
        assert stages[6] == IntakeStage.RECOMMENDATION

    def test_lexicon_match_extracted(self, ontology, lexicon, embedder):
        plain = [(t, c) for t, c in lexicon.terms.items() if not {"and", "but"} & set(t)]
        term, code = min(plain, key=lambda item: item[1])
        aid = StubDecisionAid(ontology, lexicon, embedder, DrugFeatureTable())
        record = aid.intake([ChatMessage("patient", f"I was told I have {' '.join(term)}.")])
        assert code in record.extracted
        assert record.traces and record.traces[0].turn == 1
        assert len(record.traces[0].candidates) <= aid.depth

    def test_recommendation_by_overlap(self, ontology, lexicon, embedder):
        a, b = ConceptCode("a", Vocabulary.DIAGNOSIS), ConceptCode("b", Vocabulary.DIAGNOSIS)
        table = DrugFeatureTable(features={"outcome:x": [a], "outcome:y": [a, b]})
        assert table.recommend([a, b]) == "outcome:y"
        assert table.recommend([a]) == "outcome:x"
        assert table.recommend([]) == NO_RECOMMENDATION

    def test_table_from_cohort(self, cohort):
        table = DrugFeatureTable.from_cohort(cohort)
        assert set(table.features) == {o.qualified for o in cohort.outcomes()}
        assert any(table.features.values())
