import json
from typing import List

import pytest

from core.errors import DesignError, PortError, PromptAssemblyError, SchemaParseError, SchemaValidationError
from orchestrator import (
    AbortReason,
    ConversationLimits,
    ConversationStatus,
    DesignSetting,
    ExperimentDesign,
    ProfileSelector,
    TurnStatus,
    full_design,
    load_design,
    load_manifest,
    parse_simulator_turn,
    plain_response,
    plan_conversations,
    read_conversation_log,
    run_conversation,
    run_experiment,
    save_design,
    serialize_simulator_turn,
    write_conversation_log,
)
from persona import PersonaPromptSpec, load_behavioral, load_linguistic
from plugins.ports import (
    STAGE_ORDER,
    AidQuestion,
    ChatPort,
    DrugFeatureTable,
    IntakeRecord,
    IntakeStage,
    Recommendation,
    StubDecisionAid,
    StubPatient,
    SutPort,
)
from profilegen import GenConfig, generate_profiles

VALID = r'''{"relevant_medical_history": ["[1.1] Age: 34", "[2.1] Insomnia"],
 "style_transferred_medical_history": ["[1.1] 34", "[2.1] trouble sleeping"],
 "response": "I'm <\s>34</\s> [1.1] and have <\s>trouble sleeping</\s> [2.1]."}'''


def reply(relevant: List[str], styled: List[str], response: str) -> str:
    return json.dumps({
        "relevant_medical_history": relevant,
        "style_transferred_medical_history": styled,
        "response": response,
    })


class TestSchema:
    def test_bare_backslash_markers(self):
        turn = parse_simulator_turn(VALID)
        assert [t.index for t in turn.tags] == ["1.1", "2.1"]
        assert [t.span for t in turn.tags] == ["34", "trouble sleeping"]
        assert turn.referenced_indices() == ["1.1", "2.1"]

    def test_fenced_reply(self):
        assert parse_simulator_turn(f"```json\n{VALID}\n```").tags

    def test_byte_offsets(self):
        response = "Ça va <\\s>x</\\s> [1.1]"
        turn = parse_simulator_turn(reply(["[1.1] X"], ["[1.1] x"], response))
        tag = turn.tags[0]
        assert response.encode("utf-8")[tag.start:tag.end] == b"[1.1]"

    def test_round_trip(self):
        turn = parse_simulator_turn(VALID)
        assert parse_simulator_turn(serialize_simulator_turn(turn)) == turn

    @pytest.mark.parametrize("raw", ["not json", "[1, 2]", ""])
    def test_unparseable(self, raw):
        with pytest.raises(SchemaParseError) as info:
            parse_simulator_turn(raw)
        assert info.value.raw == raw

    @pytest.mark.parametrize("raw,kind", [
        ('{"relevant_medical_history": [], "response": "hi"}', "missing_field"),
        (reply([], [], None), "missing_field"),
        (reply(["[1.1] Age"], ["[1.1] 34"], "<\\s>x</\\s> [2.1]"), "dangling_index"),
        (reply(["[1.1] Age"], ["[2.2] thing"], "fine"), "dangling_index"),
        (reply(["[1.1] Age"], ["[1.1] 34"], "<\\s>34 [1.1]"), "malformed_span"),
        (reply(["[1.1] Age"], ["[1.1] 34"], "<\\s>34</\\s> no tag"), "malformed_span"),
        (reply(["Age 34"], [], "fine"), "malformed_span"),
    ])
    def test_violation_kinds(self, raw, kind):
        with pytest.raises(SchemaValidationError) as info:
            parse_simulator_turn(raw)
        assert kind in info.value.kinds

    def test_plain_response(self):
        assert plain_response(parse_simulator_turn(VALID).response) == "I'm 34 and have trouble sleeping."


# --- conversation loop -------------------------------------------------------

class ScriptedChat(ChatPort):
    name = "scripted"

    def __init__(self, replies):
        self.replies = list(replies)
        self.seen: List[list] = []

    def request(self, system_prompt, messages):
        self.seen.append(list(messages))
        value = self.replies.pop(0) if len(self.replies) > 1 else self.replies[0]
        if isinstance(value, Exception):
            raise value
        return value


class ScriptedAid(SutPort):
    """Asks `questions` rapport questions, then recommends."""
    name = "scripted_aid"

    def __init__(self, questions: int = 2):
        self.questions = questions
        self.heard: List[str] = []

    def next_question(self, history):
        self.heard = [m.content for m in history if m.role == "patient"]
        asked = sum(1 for m in history if m.role == "aid")
        if asked >= self.questions:
            return AidQuestion(IntakeStage.RECOMMENDATION, "Here is my recommendation.")
        return AidQuestion(STAGE_ORDER[asked], f"Question {asked + 1}?")

    def recommend(self, history):
        return Recommendation(recommendation="outcome:x", utterance="Try x.")

    def intake(self, history):
        return IntakeRecord()


@pytest.fixture(scope="module")
def profile(cohort):
    cfg = GenConfig(outcome=cohort.most_treated_outcome(), top_k=60, rng_seed=31)
    return generate_profiles(cohort, cfg, count=1, show_progress=False).profiles[0]


@pytest.fixture(scope="module")
def persona(profile):
    return PersonaPromptSpec(
        medical=profile,
        linguistic=load_linguistic("functional_hl"),
        behavioral=load_behavioral("structured_cooperative"),
    )


@pytest.fixture(scope="module")
def stub_aid(cohort, ontology, lexicon, embedder):
    return StubDecisionAid(ontology, lexicon, embedder, DrugFeatureTable.from_cohort(cohort))


class TestConversation:
    def test_completes_with_recommendation(self, persona):
        conv = run_conversation(persona, ScriptedChat([VALID]), ScriptedAid(2), ConversationLimits())
        assert conv.status == ConversationStatus.COMPLETED
        assert conv.final_recommendation == "outcome:x"
        assert conv.stage_labels == [IntakeStage.RAPPORT, IntakeStage.ILLNESS_HISTORY, IntakeStage.RECOMMENDATION]
        assert [t.number for t in conv.turns] == [1, 2]

    def test_histories_differ_by_side(self, persona):
        chat, aid = ScriptedChat([VALID]), ScriptedAid(2)
        run_conversation(persona, chat, aid, ConversationLimits())
        patient_view = [m.content for m in chat.seen[1] if m.role == "patient"]
        assert patient_view == [serialize_simulator_turn(parse_simulator_turn(VALID))]
        assert aid.heard == ["I'm 34 and have trouble sleeping."] * 2

    def test_retry_then_success(self, persona):
        chat = ScriptedChat(["oops", VALID])
        conv = run_conversation(persona, chat, ScriptedAid(1), ConversationLimits(max_retries=2))
        assert conv.turns[0].status == TurnStatus.OK
        assert conv.turns[0].attempts == 2
        assert conv.turns[0].violations == []

    def test_parse_failed_after_retries(self, persona):
        bad = reply(["[1.1] Age"], [], "<\\s>x</\\s> [9.9]")
        conv = run_conversation(persona, ScriptedChat([bad]), ScriptedAid(1), ConversationLimits(max_retries=1))
        turn = conv.turns[0]
        assert turn.status == TurnStatus.PARSE_FAILED
        assert turn.attempts == 2
        assert turn.raw == bad
        assert turn.violations[0][0] == "dangling_index"
        assert conv.status == ConversationStatus.COMPLETED

    def test_turn_cap(self, persona):
        conv = run_conversation(persona, ScriptedChat([VALID]), ScriptedAid(10), ConversationLimits(max_turns=3))
        assert conv.status == ConversationStatus.ABORTED
        assert conv.abort_reason == AbortReason.TURN_CAP
        assert len(conv.turns) == 3
        assert conv.final_recommendation is None

    def test_wall_clock(self, persona):
        limits = ConversationLimits(wall_clock_seconds=-1.0)
        conv = run_conversation(persona, ScriptedChat([VALID]), ScriptedAid(3), limits)
        assert conv.abort_reason == AbortReason.WALL_CLOCK
        assert not conv.turns

    def test_port_error_keeps_partial_log(self, persona):
        chat = ScriptedChat([VALID, PortError("connection reset")])
        conv = run_conversation(persona, chat, ScriptedAid(4), ConversationLimits())
        assert conv.abort_reason == AbortReason.PORT_ERROR
        assert len(conv.turns) == 1
        assert "connection reset" in conv.error

    def test_stub_ports_end_to_end(self, persona, ontology, stub_aid):
        patient = StubPatient(persona, seed=3, ontology=ontology)
        conv = run_conversation(persona, patient, stub_aid, ConversationLimits(), seed=3)
        assert conv.status == ConversationStatus.COMPLETED
        assert [t.stage for t in conv.turns] == STAGE_ORDER[:-1]
        assert all(t.status == TurnStatus.OK for t in conv.turns)
        assert conv.final_recommendation is not None
        assert conv.intake is not None
        cited = {i for t in conv.ok_turns() for i in t.turn.referenced_indices()}
        assert cited <= set(persona.medical.fact_map())

    def test_prompt_errors_propagate(self, persona):
        broken = persona.medical.model_copy(deep=True)
        broken.sections[0].facts[1].index = broken.sections[0].facts[0].index
        with pytest.raises(PromptAssemblyError):
            run_conversation(persona.model_copy(update={"medical": broken}), ScriptedChat([VALID]),
                             ScriptedAid(1), ConversationLimits())

    def test_log_round_trip(self, tmp_path, persona, ontology, stub_aid):
        conv = run_conversation(persona, StubPatient(persona, seed=1, ontology=ontology), stub_aid,
                                ConversationLimits(), conversation_id="c1", seed=1, stage_wording="scripted")
        path = write_conversation_log(conv, tmp_path / "c1.jsonl")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert json.loads(lines[0])["record"] == "header"
        assert json.loads(lines[-1])["record"] == "outcome"
        assert read_conversation_log(path).model_dump(mode="json") == conv.model_dump(mode="json")


# --- experiment design -------------------------------------------------------

class TestDesign:
    def test_full_design_counts(self, profile):
        pool = [profile.model_copy(update={"profile_id": f"p{i:02d}"}) for i in range(60)]
        plan, per_setting = plan_conversations(full_design(), pool, seed=42)
        assert per_setting == {"linguistic_variation": 300, "behavioral_variation": 180, "intersection": 150}
        assert len(plan) == 500
        assert len({p.conversation_id for p in plan}) == 500
        assert sum(len(p.settings) > 1 for p in plan) == 120
        assert sum(len(p.settings) - 1 for p in plan) == sum(per_setting.values()) - 500

    def test_replicates_get_own_ids_and_seeds(self, profile):
        design = ExperimentDesign(replicates=2, settings=[
            DesignSetting(name="s", linguistic=["limited_hl"], behavioral=["structured_cooperative"]),
        ])
        plan, _ = plan_conversations(design, [profile], seed=1)
        assert [p.conversation_id.rsplit("__", 1)[1] for p in plan] == ["r0", "r1"]
        assert plan[0].seed != plan[1].seed

    def test_unknown_profile_and_shortage(self, profile):
        for selector in (ProfileSelector(ids=["nobody"]), ProfileSelector(first=5)):
            design = ExperimentDesign(settings=[
                DesignSetting(name="s", linguistic=["limited_hl"], behavioral=["structured_cooperative"], profiles=selector),
            ])
            with pytest.raises(DesignError):
                plan_conversations(design, [profile], seed=1)

    def test_yaml_round_trip(self, tmp_path):
        path = save_design(full_design(n_profiles=4, n_intersection=2), tmp_path / "design.yaml")
        assert load_design(path) == full_design(n_profiles=4, n_intersection=2)

    @pytest.mark.parametrize("body", [
        "settings: []\n",
        "settings:\n  - name: s\n    linguistic: [poetic]\n    behavioral: [structured_cooperative]\n",
        "settings: [unclosed\n",
    ])
    def test_bad_design_files(self, tmp_path, body):
        path = tmp_path / "design.yaml"
        path.write_text(body, encoding="utf-8")
        with pytest.raises(DesignError):
            load_design(path)


def test_run_experiment(tmp_path, profile, ontology, stub_aid):
    pool = [profile.model_copy(update={"profile_id": f"p{i}"}) for i in range(2)]
    design = ExperimentDesign(design_id="small", settings=[
        DesignSetting(name="s", linguistic=["limited_hl", "proficient_hl"], behavioral=["adversarial_combative"]),
    ])

    def factory(persona, item):
        if item.profile_id == "p1" and item.linguistic == "proficient_hl":
            raise PortError("aid unavailable")
        return StubPatient(persona, seed=item.seed, ontology=ontology), stub_aid

    manifest = run_experiment(design, pool, factory, ConversationLimits(), tmp_path, seed=5,
                              workers=2, show_progress=False)
    statuses = {c.conversation_id: c.status for c in manifest.conversations}
    assert statuses["p1__proficient_hl__adversarial_combative"] == ConversationStatus.FAILED
    assert sum(s == ConversationStatus.COMPLETED for s in statuses.values()) == 3
    cell = manifest.cell("proficient_hl", "adversarial_combative")
    assert cell.count == 2 and cell.failed == 1 and len(cell.logs) == 1
    assert len(list((tmp_path / "logs").glob("*.jsonl"))) == 3
    assert load_manifest(tmp_path / "manifest.json") == manifest
