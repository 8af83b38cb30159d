"""Rule-based patient simulator for offline runs.

Answers each aid question with the profile facts the question asks about,
paraphrased through a fixed per-linguistic-profile table and shaped by the
behavioral profile. Output always follows the simulator JSON schema, so
every downstream module can be exercised without a language model.
"""
import json
import math
import re
from typing import Callable, Dict, List, Optional, Set

import numpy as np

from core.models import DemographicKind, MedicalFact, MedicalProfile, SectionName
from core.utils import stable_seed
from ontology import Ontology, tokenize
from persona.models import BehavioralName, LinguisticName, PersonaPromptSpec
from persona.prompts import SPAN_CLOSE, SPAN_OPEN

from .base import ChatMessage, ChatPort
from .registry import PortRegistry

_TAG = re.compile(r"\[(\d+\.\d+)\]")

SECTION_CUES: Dict[SectionName, Set[str]] = {
    SectionName.DEMOGRAPHICS: {"age", "gender", "old", "sex"},
    SectionName.DIAGNOSES: {"condition", "conditions", "diagnosis", "diagnoses", "diagnosed", "illness", "illnesses"},
    SectionName.MEDICATIONS: {"medication", "medications", "medicine", "medicines", "antidepressant", "antidepressants", "taking", "pills"},
    SectionName.PROCEDURES: {"procedure", "procedures", "test", "tests", "therapy", "surgery", "sessions"},
}
ANTIDEPRESSANT_CUES = {"antidepressant", "antidepressants"}
OTHER_CUES = {"other", "else"}
STOPWORDS = {"of", "the", "a", "an", "in", "and", "or", "with", "to", "for", "you", "your", "have", "any", "what", "which", "do"}

# Everyday wording, longest key first when applied
LAY_TERMS = {
    "major depressive disorder": "depression",
    "generalized anxiety disorder": "worrying all the time",
    "post-traumatic stress disorder": "ptsd",
    "attention deficit hyperactivity disorder": "adhd",
    "obsessive-compulsive disorder": "ocd",
    "type 2 diabetes mellitus": "sugar diabetes",
    "gastroesophageal reflux disease": "heartburn",
    "chronic obstructive pulmonary disease": "lung trouble",
    "obstructive sleep apnea": "breathing stops when I sleep",
    "individual psychotherapy": "talked to someone",
    "group psychotherapy": "group talks",
    "family psychotherapy": "family counseling",
    "cognitive behavioral therapy": "that talking therapy",
    "magnetic resonance imaging of brain": "brain scan",
    "computed tomography of head": "head scan",
    "hemoglobin a1c measurement": "sugar blood test",
    "prehypertension": "blood pressure a bit high",
    "hypertension": "high blood pressure",
    "hyperlipidemia": "high cholesterol",
    "insomnia": "trouble sleeping",
    "electrocardiogram": "heart test",
    "echocardiography": "heart ultrasound",
    "oral tablet": "pill",
    "oral capsule": "capsule",
    "oral solution": "liquid",
    "extended release": "long-acting",
    "disorder": "problem",
    "chronic": "long-time",
    "recurrent": "keeps coming back",
}
_LAY_ORDER = sorted(LAY_TERMS, key=len, reverse=True)

FILLERS = ["Um", "Uh", "Well", "Hmm"]
TANGENTS = [
    "Sorry, my dog hasn't been eating and I keep thinking about that.",
    "Oh, I almost forgot, my sister is visiting this weekend.",
    "Wait, did I leave the stove on? Anyway.",
    "The traffic this morning was terrible, by the way.",
]
HOSTILE = [
    "Why do you even need to know that? This is ridiculous.",
    "Seriously, this is a waste of my time.",
    "Another stupid question. Fine.",
    "I already told the last useless doctor all of this.",
]
CURIOUS = [
    "Could that be related to how I've been feeling?",
    "Is that something I should be worried about?",
    "Does that change which medication might work for me?",
]


def lay_wording(text: str) -> str:
    out = text.lower()
    for term in _LAY_ORDER:
        out = out.replace(term, LAY_TERMS[term])
    return out


def join_spans(spans: List[str]) -> str:
    if len(spans) <= 1:
        return "".join(spans)
    return ", ".join(spans[:-1]) + " and " + spans[-1]


class StubPatient(ChatPort):
    """Deterministic schema-valid patient simulator.

    Example:
        patient = StubPatient(spec, seed=11, ontology=ontology)
        raw = patient.request(prompt, [ChatMessage("aid", "What conditions do you have?")])
    """

    name = "stub_patient"
    description = "Rule-based patient simulator (offline)"

    def __init__(self, spec: PersonaPromptSpec, seed: int = 0, ontology: Optional[Ontology] = None):
        self.spec = spec
        self.seed = seed
        self.linguistic = LinguisticName(spec.linguistic.name)
        self.behavioral = BehavioralName(spec.behavioral.name)
        self.antidepressants: Set[str] = set()
        if ontology is not None:
            for fact in spec.medical.facts():
                if any(a.id == "antidepressant" for a in ontology.ancestors(fact.code)):
                    self.antidepressants.add(fact.index)

    # ---------------------------------------------------------- fact choice

    def relevant_facts(self, question: str, mentioned: Set[str]) -> List[MedicalFact]:
        tokens = set(tokenize(question))
        profile: MedicalProfile = self.spec.medical
        chosen: List[MedicalFact] = []
        for section in profile.sections:
            cued = bool(tokens & SECTION_CUES[section.name])
            for fact in section.facts:
                if fact.index in mentioned:
                    continue
                if cued and section.name == SectionName.MEDICATIONS and self.antidepressants:
                    wants_ad = bool(tokens & ANTIDEPRESSANT_CUES)
                    wants_other = bool(tokens & OTHER_CUES) or not wants_ad
                    is_ad = fact.index in self.antidepressants
                    if (is_ad and wants_ad) or (not is_ad and wants_other):
                        chosen.append(fact)
                    continue
                if cued:
                    chosen.append(fact)
                    continue
                name_tokens = set(tokenize(fact.text)) - STOPWORDS
                if name_tokens & (tokens - STOPWORDS):
                    chosen.append(fact)
        return chosen

    def shape_by_behavior(self, facts: List[MedicalFact]) -> List[MedicalFact]:
        if self.behavioral in (BehavioralName.DISTRACTED_UNFOCUSED, BehavioralName.ADVERSARIAL_COMBATIVE):
            return facts[:math.ceil(len(facts) / 2)]
        if self.behavioral == BehavioralName.RESERVED_MINIMALIST:
            return facts[:1]
        return facts

    # ----------------------------------------------------------- paraphrase

    def paraphrase(self, fact: MedicalFact) -> str:
        if fact.demographic == DemographicKind.AGE_BIN:
            age = fact.text.split(":", 1)[-1].strip()
            return age if self.linguistic == LinguisticName.LIMITED_HL else f"{age} years old"
        if fact.demographic == DemographicKind.GENDER:
            gender = fact.text.split(":", 1)[-1].strip().lower()
            return {"female": "a woman", "male": "a man"}.get(gender, gender)
        if self.linguistic in (LinguisticName.LIMITED_HL, LinguisticName.DEPRESSION):
            return lay_wording(fact.text)
        if self.linguistic == LinguisticName.PROFICIENT_HL:
            return fact.text
        return fact.text.lower()

    def compose(self, demographics: List[str], clinical: List[str], rng: np.random.Generator) -> str:
        sentences: List[str] = []
        filler = FILLERS[int(rng.integers(len(FILLERS)))]
        style: Dict[LinguisticName, Callable[[str], str]] = {
            LinguisticName.LIMITED_HL: lambda s: f"{filler}, I'm {s}.",
            LinguisticName.FUNCTIONAL_HL: lambda s: f"I'm {s}.",
            LinguisticName.PROFICIENT_HL: lambda s: f"For the record, I am {s}.",
            LinguisticName.DEPRESSION: lambda s: f"I'm {s}... whatever that matters.",
            LinguisticName.ILLNESS_ANXIETY: lambda s: f"I'm {s}, is that a problem at my age?",
        }
        if demographics:
            sentences.append(style[self.linguistic](join_spans(demographics)))
        if clinical:
            if self.linguistic == LinguisticName.LIMITED_HL:
                sentences.extend(
                    f"{FILLERS[int(rng.integers(len(FILLERS)))]}, {span}." if i == 0 else f"Also {span}."
                    for i, span in enumerate(clinical)
                )
            elif self.linguistic == LinguisticName.FUNCTIONAL_HL:
                sentences.append(f"I have {join_spans(clinical)}.")
            elif self.linguistic == LinguisticName.PROFICIENT_HL:
                sentences.append(
                    f"My documented history includes {join_spans(clinical)}, "
                    "which my physicians have been monitoring comprehensively."
                )
            elif self.linguistic == LinguisticName.DEPRESSION:
                sentences.append(f"I guess there's {join_spans(clinical)}... I'm just tired of all of it, nothing really helps.")
            else:
                sentences.append(
                    f"I have {join_spans(clinical)}, and what if it's getting worse? "
                    "I keep reading about it and I'm really worried."
                )
        return " ".join(sentences)

    def nothing_to_say(self) -> str:
        return {
            LinguisticName.LIMITED_HL: "Uh, no, I don't think so.",
            LinguisticName.FUNCTIONAL_HL: "No, nothing like that.",
            LinguisticName.PROFICIENT_HL: "No, I have no relevant history to report in that regard.",
            LinguisticName.DEPRESSION: "No... nothing.",
            LinguisticName.ILLNESS_ANXIETY: "No, I don't think so, but should I have had that checked?",
        }[self.linguistic]

    # -------------------------------------------------------------- request

    def request(self, system_prompt: str, messages: List[ChatMessage]) -> str:
        question = next((m.content for m in reversed(messages) if m.role == "aid"), "")
        mentioned: Set[str] = set()
        for message in messages:
            if message.role == "patient":
                mentioned.update(_TAG.findall(message.content))
        turn_number = sum(1 for m in messages if m.role == "aid")
        rng = np.random.default_rng(stable_seed(self.seed, turn_number))

        facts = self.shape_by_behavior(self.relevant_facts(question, mentioned))
        spans = {f.index: self.paraphrase(f) for f in facts}
        rendered = {idx: f"{SPAN_OPEN}{text}{SPAN_CLOSE} [{idx}]" for idx, text in spans.items()}
        demographics = [rendered[f.index] for f in facts if f.demographic is not None]
        clinical = [rendered[f.index] for f in facts if f.demographic is None]

        body = self.compose(demographics, clinical, rng) if facts else self.nothing_to_say()
        if self.behavioral == BehavioralName.ADVERSARIAL_COMBATIVE:
            body = f"{HOSTILE[int(rng.integers(len(HOSTILE)))]} {body}"
        elif self.behavioral == BehavioralName.DISTRACTED_UNFOCUSED:
            body = f"{body} {TANGENTS[int(rng.integers(len(TANGENTS)))]}"
        elif self.behavioral == BehavioralName.INQUISITIVE_OPEN_ENDED:
            body = f"{body} {CURIOUS[int(rng.integers(len(CURIOUS)))]}"

        return json.dumps({
            "relevant_medical_history": [f.tagged() for f in facts],
            "style_transferred_medical_history": [f"[{idx}] {text}" for idx, text in spans.items()],
            "response": body,
        }, ensure_ascii=False)


PortRegistry.register(StubPatient)
