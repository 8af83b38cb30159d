"""Synthetic concept table and patient cohort for offline runs and tests.

The generated world mimics the shape of a de-identified psychiatric cohort:
diagnoses, medications and procedures arranged in a multi-parent is-a
hierarchy, gender and age-bin demographics, and antidepressant response
outcomes that depend on a seeded subset of features. Nothing here is real
patient data.
"""
import logging
from typing import Dict, List, Tuple

import numpy as np

from config import Defaults
from core.models import ConceptCode, Vocabulary
from core.utils import get_slug
from ontology import Concept, Ontology

from .models import OutcomeFlag, PatientRecord

logger = logging.getLogger("patsim.cohort")


# category id -> (display name, [(base display, extra category ids)])
DIAGNOSIS_CATEGORIES: Dict[str, Tuple[str, List[Tuple[str, Tuple[str, ...]]]]] = {
    "mental_disorder": ("Mental disorder", [
        ("Major depressive disorder", ()),
        ("Generalized anxiety disorder", ()),
        ("Panic disorder", ()),
        ("Insomnia", ()),
        ("Bipolar disorder", ()),
        ("Post-traumatic stress disorder", ()),
        ("Attention deficit hyperactivity disorder", ()),
        ("Alcohol use disorder", ()),
        ("Obsessive-compulsive disorder", ()),
        ("Social anxiety disorder", ()),
        ("Adjustment disorder", ()),
        ("Illness anxiety disorder", ()),
    ]),
    "cardiovascular_disorder": ("Cardiovascular disorder", [
        ("Hypertension", ()),
        ("Prehypertension", ()),
        ("Atrial fibrillation", ()),
        ("Coronary artery disease", ()),
        ("Heart failure", ()),
    ]),
    "metabolic_disorder": ("Metabolic disorder", [
        ("Type 2 diabetes mellitus", ()),
        ("Hyperlipidemia", ("cardiovascular_disorder",)),
        ("Obesity", ()),
        ("Hypothyroidism", ()),
        ("Vitamin D deficiency", ()),
    ]),
    "neurological_disorder": ("Neurological disorder", [
        ("Migraine", ()),
        ("Epilepsy", ()),
        ("Peripheral neuropathy", ("metabolic_disorder",)),
        ("Chronic pain syndrome", ("musculoskeletal_disorder",)),
        ("Restless legs syndrome", ()),
    ]),
    "respiratory_disorder": ("Respiratory disorder", [
        ("Asthma", ()),
        ("Chronic obstructive pulmonary disease", ()),
        ("Obstructive sleep apnea", ()),
        ("Allergic rhinitis", ()),
    ]),
    "digestive_disorder": ("Digestive disorder", [
        ("Gastroesophageal reflux disease", ()),
        ("Irritable bowel syndrome", ()),
        ("Chronic constipation", ()),
    ]),
    "musculoskeletal_disorder": ("Musculoskeletal disorder", [
        ("Osteoarthritis", ()),
        ("Low back pain", ()),
        ("Fibromyalgia", ()),
        ("Rheumatoid arthritis", ()),
    ]),
}

MEDICATION_CATEGORIES: Dict[str, Tuple[str, List[Tuple[str, Tuple[str, ...]]]]] = {
    "antidepressant": ("Antidepressant", [
        ("Sertraline", ()),
        ("Trazodone", ()),
        ("Fluoxetine", ()),
        ("Duloxetine", ("analgesic",)),
        ("Escitalopram", ()),
        ("Bupropion", ()),
        ("Citalopram", ()),
        ("Venlafaxine", ()),
        ("Mirtazapine", ()),
        ("Paroxetine", ()),
    ]),
    "antihypertensive": ("Antihypertensive agent", [
        ("Lisinopril", ()),
        ("Amlodipine", ()),
        ("Losartan", ()),
        ("Metoprolol", ()),
        ("Hydrochlorothiazide", ()),
    ]),
    "lipid_lowering": ("Lipid lowering agent", [
        ("Atorvastatin", ()),
        ("Simvastatin", ()),
        ("Rosuvastatin", ()),
    ]),
    "antidiabetic": ("Antidiabetic agent", [
        ("Metformin", ()),
        ("Insulin glargine", ()),
        ("Empagliflozin", ()),
    ]),
    "anxiolytic_hypnotic": ("Anxiolytic or hypnotic", [
        ("Alprazolam", ()),
        ("Lorazepam", ()),
        ("Clonazepam", ()),
        ("Zolpidem", ()),
        ("Hydroxyzine", ()),
    ]),
    "analgesic": ("Analgesic", [
        ("Ibuprofen", ()),
        ("Gabapentin", ()),
        ("Acetaminophen", ()),
        ("Tramadol", ()),
    ]),
    "other_agent": ("Other therapeutic agent", [
        ("Levothyroxine", ()),
        ("Omeprazole", ()),
        ("Albuterol", ()),
        ("Montelukast", ()),
        ("Lithium carbonate", ()),
        ("Quetiapine", ()),
        ("Aripiprazole", ()),
    ]),
}

PROCEDURE_CATEGORIES: Dict[str, Tuple[str, List[Tuple[str, Tuple[str, ...]]]]] = {
    "psychotherapy": ("Psychotherapy", [
        ("Individual psychotherapy", ()),
        ("Group psychotherapy", ()),
        ("Cognitive behavioral therapy", ()),
        ("Family psychotherapy", ()),
    ]),
    "laboratory_test": ("Laboratory test", [
        ("Complete blood count", ()),
        ("Lipid panel", ()),
        ("Thyroid function test", ()),
        ("Hemoglobin A1c measurement", ()),
        ("Urine drug screen", ()),
    ]),
    "imaging": ("Diagnostic imaging", [
        ("Chest radiograph", ()),
        ("Magnetic resonance imaging of brain", ()),
        ("Computed tomography of head", ()),
        ("Echocardiography", ("cardiac_procedure",)),
    ]),
    "cardiac_procedure": ("Cardiac procedure", [
        ("Electrocardiogram", ()),
        ("Cardiac stress test", ()),
        ("Holter monitoring", ()),
    ]),
    "evaluation": ("Clinical evaluation", [
        ("Psychiatric diagnostic evaluation", ()),
        ("Depression screening", ()),
        ("Polysomnography", ()),
        ("Physical therapy evaluation", ()),
    ]),
    "intervention": ("Therapeutic intervention", [
        ("Electroconvulsive therapy", ()),
        ("Transcranial magnetic stimulation", ()),
        ("Influenza vaccination", ()),
        ("Colonoscopy", ()),
    ]),
}

VARIANTS = {
    Vocabulary.DIAGNOSIS: ["Recurrent {}", "Chronic {}", "Mild {}", "Severe {}", "{} in remission", "Unspecified {}"],
    Vocabulary.MEDICATION: ["{} oral tablet", "{} oral capsule", "{} extended release", "{} oral solution"],
    Vocabulary.PROCEDURE: ["Initial {}", "Follow up {}", "Extended {}", "Brief {}"],
}

ROOTS = {
    Vocabulary.DIAGNOSIS: ("clinical_finding", "Clinical finding", DIAGNOSIS_CATEGORIES),
    Vocabulary.MEDICATION: ("pharmaceutical_product", "Pharmaceutical product", MEDICATION_CATEGORIES),
    Vocabulary.PROCEDURE: ("clinical_procedure", "Clinical procedure", PROCEDURE_CATEGORIES),
}

# Treatment mix across antidepressant outcomes
DRUG_SHARES = {
    "Sertraline": 0.17,
    "Trazodone": 0.15,
    "Fluoxetine": 0.13,
    "Duloxetine": 0.11,
    "Escitalopram": 0.10,
    "Bupropion": 0.10,
    "Citalopram": 0.09,
    "Venlafaxine": 0.07,
    "Mirtazapine": 0.05,
    "Paroxetine": 0.03,
}

GENDERS = [("female", "Female", 0.62), ("male", "Male", 0.38)]
AGE_BINS = [
    ("18-29", 0.18), ("30-39", 0.19), ("40-49", 0.18), ("50-59", 0.17),
    ("60-69", 0.14), ("70-79", 0.09), ("80+", 0.05),
]


def outcome_id(drug: str) -> str:
    return f"resp_{get_slug(drug)}"


def _prefix(vocabulary: Vocabulary) -> str:
    return {Vocabulary.DIAGNOSIS: "dx", Vocabulary.MEDICATION: "rx", Vocabulary.PROCEDURE: "px"}[vocabulary]


class SyntheticWorldGenerator:
    """Deterministic generator of an ontology plus patient cohort.

    Example:
        generator = SyntheticWorldGenerator(n_patients=600, n_concepts=150, seed=3)
        ontology, records = generator.generate()
    """

    def __init__(
        self,
        n_patients: int = Defaults.SYNTH_PATIENTS,
        n_concepts: int = Defaults.SYNTH_CONCEPTS,
        seed: int = Defaults.SEED,
        n_clusters: int = 8,
    ):
        self.n_patients = n_patients
        self.n_concepts = n_concepts
        self.seed = seed
        self.n_clusters = n_clusters

    # -------------------------------------------------------------- ontology

    def build_ontology(self) -> Ontology:
        concepts: List[Concept] = []

        def add(vocabulary: Vocabulary, cid: str, name: str, parents: Tuple[str, ...] = ()) -> None:
            concepts.append(Concept(code=ConceptCode(cid, vocabulary), display_name=name, parent_ids=parents))

        # Demographics
        add(Vocabulary.DEMOGRAPHIC, "gender", "Gender")
        for gid, name, _ in GENDERS:
            add(Vocabulary.DEMOGRAPHIC, gid, name, ("gender",))
        add(Vocabulary.DEMOGRAPHIC, "age", "Age")
        for label, _ in AGE_BINS:
            add(Vocabulary.DEMOGRAPHIC, f"age_{get_slug(label) or 'bin'}", f"Age {label}", ("age",))

        # Outcomes
        add(Vocabulary.OUTCOME, "antidepressant_response", "Antidepressant response")
        for drug in DRUG_SHARES:
            add(Vocabulary.OUTCOME, outcome_id(drug), f"{drug} response", ("antidepressant_response",))

        # Feature roots and categories
        base_queues: List[List[Tuple[Vocabulary, str, str, Tuple[str, ...]]]] = []
        for vocabulary, (root_id, root_name, categories) in ROOTS.items():
            add(vocabulary, root_id, root_name)
            for cat_id, (cat_name, bases) in categories.items():
                add(vocabulary, cat_id, cat_name, (root_id,))
                queue = []
                for base_name, extra in bases:
                    base_id = f"{_prefix(vocabulary)}_{get_slug(base_name)}"
                    queue.append((vocabulary, base_id, base_name, (cat_id,) + extra))
                base_queues.append(queue)

        budget = max(0, self.n_concepts - len(concepts))

        # Bases round-robin across categories, then variants round-robin across bases
        bases = _round_robin(base_queues)[:budget]
        for vocabulary, base_id, base_name, parents in bases:
            add(vocabulary, base_id, base_name, parents)
        budget -= len(bases)

        variant_queues = []
        for vocabulary, base_id, base_name, _ in bases:
            queue = []
            for pattern in VARIANTS[vocabulary]:
                modifier = pattern.replace("{}", "").split()[0].lower()
                if modifier in base_name.lower().split():
                    continue
                name = pattern.format(base_name if pattern.startswith("{}") else base_name.lower())
                queue.append((vocabulary, f"{base_id}__{get_slug(pattern.replace('{}', ''))}", name, (base_id,)))
            variant_queues.append(queue)
        for vocabulary, cid, name, parents in _round_robin(variant_queues)[:budget]:
            add(vocabulary, cid, name, parents)

        return Ontology(concepts)

    # ---------------------------------------------------------------- cohort

    def generate(self) -> Tuple[Ontology, List[PatientRecord]]:
        """Build the ontology and a cohort of n_patients records."""
        ontology = self.build_ontology()
        rng = np.random.default_rng(self.seed)

        features = [
            c.code for c in ontology.concepts()
            if c.code.vocabulary in ROOTS and ontology.parents(c.code)
            and c.code.id not in _category_ids()
        ]
        n_f = len(features)
        n = self.n_patients

        clusters = rng.integers(0, self.n_clusters, size=n_f)
        prevalence = np.clip(rng.beta(1.1, 20.0, size=n_f), 0.01, 0.4)
        latent = rng.random((n, self.n_clusters)) < 0.35
        probs = prevalence[None, :] * np.where(latent[:, clusters], 2.2, 0.45)
        holds = rng.random((n, n_f)) < np.clip(probs, 0.0, 0.95)

        strong = rng.random(n_f) < 0.12
        effects = np.where(strong, rng.normal(0.0, 0.8, n_f), rng.normal(0.0, 0.2, n_f))

        drugs = list(DRUG_SHARES)
        shares = np.array([DRUG_SHARES[d] for d in drugs])
        drug_offsets = rng.normal(0.0, 0.3, len(drugs))
        drug_effects = effects[None, :] + rng.normal(0.0, 0.25, (len(drugs), n_f))

        gender_codes = [ConceptCode(g, Vocabulary.DEMOGRAPHIC) for g, _, _ in GENDERS]
        gender_p = np.array([p for _, _, p in GENDERS])
        age_codes = [ConceptCode(f"age_{get_slug(label) or 'bin'}", Vocabulary.DEMOGRAPHIC) for label, _ in AGE_BINS]
        age_p = np.array([p for _, p in AGE_BINS])

        records = []
        width = len(str(n))
        for i in range(n):
            row = np.flatnonzero(holds[i])
            concepts = [features[j] for j in row]
            concepts.append(gender_codes[rng.choice(len(gender_codes), p=gender_p)])
            concepts.append(age_codes[rng.choice(len(age_codes), p=age_p)])

            n_treat = 1 + int(rng.binomial(2, 0.3))
            treated = rng.choice(len(drugs), size=n_treat, replace=False, p=shares)
            outcomes = []
            for d in sorted(int(t) for t in treated):
                logit = -0.1 + drug_offsets[d] + float(drug_effects[d, row].sum())
                p = 1.0 / (1.0 + np.exp(-logit))
                outcomes.append(OutcomeFlag(
                    code=ConceptCode(outcome_id(drugs[d]), Vocabulary.OUTCOME),
                    responded=bool(rng.random() < p),
                ))
            records.append(PatientRecord(
                patient_id=f"p{i + 1:0{width}d}",
                concepts=concepts,
                outcomes=outcomes,
            ))

        logger.debug(f"[Synthetic] {len(ontology)} concepts, {n} patients, {n_f} feature concepts")
        return ontology, records


def _category_ids() -> set:
    ids = set()
    for _, _, categories in ROOTS.values():
        ids.update(categories)
    return ids


def _round_robin(queues: List[list]) -> list:
    result = []
    depth = max((len(q) for q in queues), default=0)
    for level in range(depth):
        for queue in queues:
            if level < len(queue):
                result.append(queue[level])
    return result


def build_synthetic_world(
    n_patients: int = Defaults.SYNTH_PATIENTS,
    n_concepts: int = Defaults.SYNTH_CONCEPTS,
    seed: int = Defaults.SEED,
) -> Tuple[Ontology, List[PatientRecord]]:
    """Convenience wrapper around SyntheticWorldGenerator."""
    return SyntheticWorldGenerator(n_patients=n_patients, n_concepts=n_concepts, seed=seed).generate()
