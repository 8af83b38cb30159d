"""Pipeline runner - chains the toolkit stages over one run directory.

Stages hand over through files in the run directory, so each stage can run
on its own (one CLI verb each) or all in sequence with `run()`.
"""
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from agreement import (
    AgreementBundle,
    AnnotationSet,
    JudgeFailure,
    answer_key_annotations,
    compute_agreement,
    judge_annotate,
    load_agreement,
    load_template,
    read_annotations,
    simulate_annotator,
    write_agreement,
    write_annotations,
    write_resolution_template,
)
from cohort import CohortStats, PatientRecord, build_synthetic_world, load_cohort, write_cohort
from config import Defaults
from config.settings import Settings
from core.errors import PatsimError, ReportError
from core.formatting import format_metric, print_generation_summary, print_run_summary, print_section_header
from core.models import ConceptCode, MedicalProfile, Vocabulary
from core.utils import read_json, stable_seed, write_json
from metrics import (
    MetricPorts,
    MetricReport,
    evaluate_conversations,
    export_embeddings,
    load_metric_report,
    pool_recall,
    write_metric_report,
)
from ontology import Lexicon, Ontology, build_lexicon, load_ontology, write_ontology
from orchestrator import (
    Conversation,
    ConversationLimits,
    ExperimentDesign,
    ExperimentManifest,
    PlannedConversation,
    full_design,
    load_conversation_logs,
    load_design,
    load_manifest,
    run_experiment,
    save_design,
)
from persona import PersonaPromptSpec
from perturbation import PerturbationPlan, load_ground_truth, perturb_profiles, write_ground_truth
from plugins.ports import (
    STAGE_WORDING,
    AnswerKeyJudge,
    ChatPort,
    DrugFeatureTable,
    EmbeddingPort,
    HttpClassifier,
    HttpDecisionAid,
    OpenAIChat,
    PortKind,
    PortRegistry,
    StubDecisionAid,
    StubPatient,
    SutPort,
)
from profilegen import (
    GenConfig,
    LogOddsPredictor,
    SelectionReport,
    generate_profiles,
    load_profiles,
    select_cohort,
    sigma_band_plan,
    write_profiles,
)
from reporting import ReportEngine, diff_reports, load_reference_policy, load_report, policy_reference, report_records

logger = logging.getLogger("patsim.pipeline")

ANNOTATOR_NAMES = ("annotator_1", "annotator_2")


class RunPaths:
    """File layout of one run directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.ontology = self.root / "ontology.csv"
        self.cohort = self.root / "cohort.jsonl"
        self.profiles = self.root / "profiles.jsonl"
        self.generation_failures = self.root / "generation_failures.json"
        self.selected = self.root / "selected_profiles.jsonl"
        self.selection = self.root / "selection.json"
        self.perturbed = self.root / "perturbed_profiles.jsonl"
        self.perturbations = self.root / "perturbations.jsonl"
        self.perturbation_failures = self.root / "perturbation_failures.json"
        self.design = self.root / "design.yaml"
        self.manifest = self.root / "manifest.json"
        self.logs = self.root / "logs"
        self.metrics = self.root / "metrics"
        self.annotations = self.root / "annotations"
        self.judge = self.annotations / "judge.csv"
        self.judge_failures = self.annotations / "judge_failures.json"
        self.resolution = self.annotations / "resolution.csv"
        self.agreement = self.root / "agreement" / "agreement.json"
        self.report = self.root / "report"

    def annotator(self, name: str) -> Path:
        return self.annotations / f"{name}.csv"


@dataclass
class PipelineResult:
    """Result from pipeline execution."""
    success: bool = True
    counts: Dict[str, int] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)
    differences: List[str] = field(default_factory=list)

    def merge(self, other: "PipelineResult") -> None:
        self.success = self.success and other.success
        self.counts.update(other.counts)
        self.outputs.update(other.outputs)
        self.errors.extend(other.errors)
        self.differences.extend(other.differences)


def outcome_code(value: str) -> ConceptCode:
    """Accept a bare outcome id or a qualified "outcome:<id>" code."""
    if ":" in value:
        return ConceptCode.parse(value)
    return ConceptCode(id=value, vocabulary=Vocabulary.OUTCOME)


class PipelineRunner:
    """Runs the toolkit stages against a run directory.

    Example:
        runner = PipelineRunner(get_settings(), Path("output/run"))
        result = runner.run()
    """

    def __init__(self, settings: Settings, run_dir: Optional[Path] = None, show_progress: bool = True):
        self.settings = settings
        self.paths = RunPaths(Path(run_dir or settings.output.run_dir))
        self.show_progress = show_progress
        self._world: Optional[Tuple[Ontology, List[PatientRecord]]] = None
        self._cohort: Optional[CohortStats] = None
        self._lexicon: Optional[Lexicon] = None
        self._embedder: Optional[EmbeddingPort] = None
        self._table: Optional[DrugFeatureTable] = None

    # ------------------------------------------------------------------ world

    def world(self) -> Tuple[Ontology, List[PatientRecord]]:
        """Ontology and cohort: the run's own copy, configured files, or a synthetic world."""
        if self._world is not None:
            return self._world
        paths, cfg = self.paths, self.settings
        if paths.ontology.exists() and paths.cohort.exists():
            ontology = load_ontology(paths.ontology)
            records = load_cohort(paths.cohort, ontology)
            logger.info(f"[Pipeline] reusing world from {paths.root}")
        elif cfg.ontology.concept_table and cfg.cohort.records:
            ontology = load_ontology(Path(cfg.ontology.concept_table))
            records = load_cohort(Path(cfg.cohort.records), ontology)
            self._save_world(ontology, records)
        elif cfg.ontology.concept_table or cfg.cohort.records:
            raise PatsimError("ontology.concept_table and cohort.records must be configured together")
        else:
            synthetic = cfg.cohort.synthetic
            ontology, records = build_synthetic_world(synthetic.n_patients, synthetic.n_concepts, cfg.seed)
            print(f"[*] Built synthetic world: {len(ontology)} concepts, {len(records)} patients")
            self._save_world(ontology, records)
        self._world = (ontology, records)
        return self._world

    def _save_world(self, ontology: Ontology, records: List[PatientRecord]) -> None:
        write_ontology(ontology, self.paths.ontology)
        write_cohort(records, self.paths.cohort)

    @property
    def ontology(self) -> Ontology:
        return self.world()[0]

    @property
    def cohort(self) -> CohortStats:
        if self._cohort is None:
            ontology, records = self.world()
            self._cohort = CohortStats(records, ontology, self.settings.cohort.min_support)
        return self._cohort

    @property
    def lexicon(self) -> Lexicon:
        if self._lexicon is None:
            self._lexicon = build_lexicon(self.ontology, max_tokens=self.settings.ontology.max_term_tokens)
        return self._lexicon

    @property
    def embedder(self) -> EmbeddingPort:
        if self._embedder is None:
            metrics, api = self.settings.metrics, self.settings.api
            if metrics.embedder == "openai":
                options = {"model": metrics.embedding_model, "base_url": api.embedding_base_url,
                           "api_key": api.embedding_api_key, "timeout": api.timeout}
            else:
                options = {"dimension": metrics.embedding_dim, "seed": self.settings.seed}
            self._embedder = PortRegistry.create(PortKind.EMBEDDING, metrics.embedder, **options)
        return self._embedder

    @property
    def drug_table(self) -> DrugFeatureTable:
        if self._table is None:
            self._table = DrugFeatureTable.from_cohort(self.cohort)
        return self._table

    # ------------------------------------------------------------ generation

    def gen_profiles(self, count: Optional[int] = None, cohort_size: Optional[int] = None) -> PipelineResult:
        """Generate a profile batch and select the sigma-band cohort."""
        gen = self.settings.generation
        count = gen.n_profiles if count is None else count
        cohort_size = gen.cohort_size if cohort_size is None else cohort_size
        cohort = self.cohort
        outcome = outcome_code(gen.outcome) if gen.outcome else cohort.most_treated_outcome()
        cfg = GenConfig.from_settings(gen, outcome, self.settings.seed)
        print(f"[*] Generating {count} profiles for {outcome.qualified}")

        batch = generate_profiles(
            cohort, cfg, count,
            workers=gen.workers,
            predictor=LogOddsPredictor(cohort),
            show_progress=self.show_progress,
        )
        write_profiles(batch.profiles, self.paths.profiles)
        write_json(self.paths.generation_failures, [f.model_dump(mode="json") for f in batch.failures])

        rate = cohort.base_rate(outcome)
        if rate is None:
            raise PatsimError(f"no patients treated with {outcome.qualified}")
        size = min(cohort_size, len(batch.profiles))
        if size < cohort_size:
            print(f"[!] Only {len(batch.profiles)} profiles generated; selecting {size} instead of {cohort_size}")
        selection = SelectionReport(n=size, population_rate=rate)
        selected = select_cohort(
            batch.profiles, sigma_band_plan(size, rate),
            rng=stable_seed(self.settings.seed, "select"),
            report=selection,
        ) if size else []
        write_profiles(selected, self.paths.selected)
        write_json(self.paths.selection, selection.model_dump(mode="json"))

        mean_facts = (
            sum(len(p.fact_map()) for p in batch.profiles) / len(batch.profiles) if batch.profiles else 0.0
        )
        print_generation_summary(outcome.qualified, len(batch.profiles), len(batch.failures), mean_facts, len(selected))
        return PipelineResult(
            success=not batch.failures,
            counts={"profiles": len(batch.profiles), "generation_failures": len(batch.failures),
                    "selected": len(selected)},
            outputs={"profiles": str(self.paths.profiles), "selected": str(self.paths.selected)},
        )

    # ----------------------------------------------------------- perturbation

    def perturb(self) -> PipelineResult:
        """Inject errors into the selected cohort and write the ground truth."""
        profiles = load_profiles(self.paths.selected)
        plan = PerturbationPlan.from_settings(self.settings.perturbation, self.settings.seed)
        print(f"[*] Perturbing {len(profiles)} profiles (target fraction {plan.target_fraction})")
        outcome = perturb_profiles(
            profiles, self.ontology, self.embedder, plan,
            workers=self.settings.generation.workers,
            show_progress=self.show_progress,
        )
        write_profiles(outcome.profiles, self.paths.perturbed)
        write_ground_truth(outcome.records, self.paths.perturbations)
        write_json(self.paths.perturbation_failures, [f.model_dump(mode="json") for f in outcome.failures])
        print(f"[✓] {len(outcome.perturbed_ids)} profiles perturbed, {len(outcome.records)} facts replaced")
        if outcome.failures:
            print(f"[!] {len(outcome.failures)} profiles left unperturbed (no replacement found)")
        return PipelineResult(
            counts={"perturbed_profiles": len(outcome.perturbed_ids), "perturbations": len(outcome.records),
                    "perturbation_failures": len(outcome.failures)},
            outputs={"perturbed": str(self.paths.perturbed), "perturbations": str(self.paths.perturbations)},
        )

    # ------------------------------------------------------------- simulation

    def design(self, design: Optional[ExperimentDesign] = None) -> ExperimentDesign:
        if design is not None:
            return design
        if self.settings.simulation.design:
            return load_design(Path(self.settings.simulation.design))
        return full_design()

    def simulation_profiles(self) -> List[MedicalProfile]:
        """Perturbed profiles when the perturb stage ran, the selected cohort otherwise."""
        path = self.paths.perturbed if self.paths.perturbed.exists() else self.paths.selected
        return load_profiles(path)

    def port_factory(self, persona: PersonaPromptSpec, plan: PlannedConversation) -> Tuple[ChatPort, SutPort]:
        sim, api = self.settings.simulation, self.settings.api
        if sim.mode == "live":
            chat = OpenAIChat(
                model=sim.model,
                temperature=sim.temperature,
                base_url=api.chat_base_url,
                api_key=api.chat_api_key,
                timeout=api.timeout,
                seed=plan.seed,
            )
            sut = HttpDecisionAid(base_url=api.sut_base_url, api_key=api.sut_api_key, timeout=api.timeout)
            return chat, sut
        chat = StubPatient(persona, seed=plan.seed, ontology=self.ontology)
        sut = StubDecisionAid(
            self.ontology, self.lexicon, self.embedder, self.drug_table,
            depth=self.settings.metrics.retrieval_depth,
        )
        return chat, sut

    def simulate(self, design: Optional[ExperimentDesign] = None) -> PipelineResult:
        """Run every planned conversation; writes design.yaml, manifest.json and logs/."""
        sim = self.settings.simulation
        if sim.mode == "live":
            self._check_live_ports()
        design = self.design(design)
        save_design(design, self.paths.design)
        limits = ConversationLimits(
            max_turns=sim.max_turns,
            wall_clock_seconds=sim.wall_clock_seconds or None,
            max_retries=sim.max_retries,
        )
        manifest = run_experiment(
            design,
            self.simulation_profiles(),
            self.port_factory,
            limits,
            self.paths.root,
            seed=self.settings.seed,
            workers=sim.workers,
            mode=sim.mode,
            stage_wording=STAGE_WORDING if sim.mode == "stub" else "",
            show_progress=self.show_progress,
        )
        counts: Dict[str, int] = {"conversations": len(manifest.conversations)}
        for entry in manifest.conversations:
            counts[entry.status.value] = counts.get(entry.status.value, 0) + 1
        failed = sum(cell.failed for cell in manifest.cells)
        print(f"[✓] {len(manifest.conversations)} conversations in {len(manifest.cells)} cells ({failed} failed)")
        return PipelineResult(
            success=failed == 0,
            counts=counts,
            outputs={"manifest": str(self.paths.manifest), "logs": str(self.paths.logs)},
        )

    def _check_live_ports(self) -> None:
        api = self.settings.api
        missing = [name for name, value in (("chat API key", api.chat_api_key), ("decision-aid URL", api.sut_base_url))
                   if not value]
        if missing:
            raise PatsimError(f"live mode needs: {', '.join(missing)}")

    def manifest(self) -> ExperimentManifest:
        if not self.paths.manifest.exists():
            raise PatsimError(f"no manifest in {self.paths.root}; run the simulate stage first")
        return load_manifest(self.paths.manifest)

    def conversations(self) -> List[Conversation]:
        return load_conversation_logs(self.paths.logs)

    # ------------------------------------------------------------- evaluation

    def metric_ports(self) -> MetricPorts:
        metrics, api = self.settings.metrics, self.settings.api
        if metrics.classifier == "http":
            depression = HttpClassifier(url=api.depression_url, label="depression",
                                        api_key=api.classifier_api_key, timeout=api.timeout)
            toxicity = HttpClassifier(url=api.toxicity_url, label="toxic",
                                      api_key=api.classifier_api_key, timeout=api.timeout)
        else:
            depression = PortRegistry.get(PortKind.CLASSIFIER, "depression_keyword")
            toxicity = PortRegistry.get(PortKind.CLASSIFIER, "toxicity_keyword")
        return MetricPorts(lexicon=self.lexicon, embedder=self.embedder, depression=depression, toxicity=toxicity)

    def compute_metrics(self, conversations: List[Conversation]) -> MetricReport:
        metrics = self.settings.metrics
        return evaluate_conversations(
            conversations,
            self.metric_ports(),
            fkgl_backend=metrics.fkgl_backend,
            reference_scope=metrics.reference_scope,
            top_n=metrics.rank_top_n,
            workers=self.settings.simulation.workers,
            show_progress=self.show_progress,
        )

    def evaluate(self) -> PipelineResult:
        """Metrics over every conversation log; writes metrics/."""
        conversations = self.conversations()
        if not conversations:
            raise PatsimError(f"no conversation logs in {self.paths.logs}")
        report = self.compute_metrics(conversations)
        written = write_metric_report(report, self.paths.metrics)
        outputs = {name: str(path) for name, path in written.items()}
        if self.settings.metrics.export_embeddings:
            exported = export_embeddings(conversations, self.embedder, self.paths.metrics)
            if exported:
                outputs["embeddings"] = str(exported[0])
        pooled, _ = pool_recall(m.retrieval.recall for m in report.conversations)
        print(f"[✓] Evaluated {len(report.conversations)} conversations in {len(report.cells)} cells")
        print(f"    Pooled concept recall: {format_metric(pooled.recall)}")
        return PipelineResult(counts={"evaluated": len(report.conversations)}, outputs=outputs)

    # --------------------------------------------------------------- judging

    def references(self) -> Dict[str, MedicalProfile]:
        """Unperturbed profiles by id; judges and annotators grade against these."""
        if not self.paths.selected.exists():
            return {}
        return {p.profile_id: p for p in load_profiles(self.paths.selected)}

    def perturbed_indices(self) -> Dict[str, List[str]]:
        if not self.paths.perturbations.exists():
            return {}
        perturbed: Dict[str, List[str]] = {}
        for record in load_ground_truth(self.paths.perturbations):
            perturbed.setdefault(record.profile_id, []).append(record.index)
        return perturbed

    def judge_port(self, conversations: List[Conversation], references: Dict[str, MedicalProfile]) -> ChatPort:
        agreement, api = self.settings.agreement, self.settings.api
        if self.settings.simulation.mode == "live":
            return OpenAIChat(
                model=agreement.judge_model,
                temperature=Defaults.JUDGE_TEMPERATURE,
                base_url=api.chat_base_url,
                api_key=api.chat_api_key,
                timeout=api.timeout,
                seed=self.settings.seed,
            )
        indices = {
            c.profile_id: list(references.get(c.profile_id, c.profile).fact_map()) for c in conversations
        }
        return AnswerKeyJudge(perturbed=self.perturbed_indices(), profile_indices=indices)

    def judge(self) -> PipelineResult:
        """LLM-judge annotation of every conversation; writes annotations/judge.csv."""
        conversations = self.conversations()
        references = self.references()
        template = load_template(Path(self.settings.agreement.judge_template)
                                 if self.settings.agreement.judge_template else None)
        annotations, failures = judge_annotate(
            conversations, references,
            self.judge_port(conversations, references),
            template=template,
            workers=self.settings.simulation.workers,
            show_progress=self.show_progress,
        )
        write_annotations(annotations, self.paths.judge)
        write_json(self.paths.judge_failures, [f.model_dump(mode="json") for f in failures])
        print(f"[✓] Judge labeled {len(annotations.items)} items")
        if failures:
            print(f"[!] Judge failed on {len(failures)} conversations (excluded from judge agreement)")
        return PipelineResult(
            success=not failures,
            counts={"judge_items": len(annotations.items), "judge_failures": len(failures)},
            outputs={"judge": str(self.paths.judge)},
        )

    # -------------------------------------------------------------- agreement

    def stand_in_annotators(self, conversations: List[Conversation]) -> Tuple[AnnotationSet, AnnotationSet]:
        """Noisy copies of the answer key, written as annotator files."""
        key = answer_key_annotations(conversations, self.perturbed_indices(), self.references())
        noise = self.settings.agreement.annotator_noise
        sets = []
        for name in ANNOTATOR_NAMES:
            annotations = simulate_annotator(key, name, noise=noise, seed=self.settings.seed)
            write_annotations(annotations, self.paths.annotator(name))
            sets.append(annotations)
        print(f"[*] Wrote stand-in annotators (noise {noise}) to {self.paths.annotations}")
        return sets[0], sets[1]

    def perturbed_items(self, conversations: List[Conversation]) -> Set[Tuple[str, str]]:
        perturbed = self.perturbed_indices()
        return {
            (c.conversation_id, index)
            for c in conversations
            for index in perturbed.get(c.profile_id, [])
        }

    def agreement_inputs(
        self,
        first: Optional[Path] = None,
        second: Optional[Path] = None,
        judge: Optional[Path] = None,
        resolution: Optional[Path] = None,
    ) -> Dict[str, object]:
        conversations = self.conversations()
        first = first or self.paths.annotator(ANNOTATOR_NAMES[0])
        second = second or self.paths.annotator(ANNOTATOR_NAMES[1])
        if Path(first).exists() and Path(second).exists():
            human_1, human_2 = read_annotations(Path(first)), read_annotations(Path(second))
        else:
            human_1, human_2 = self.stand_in_annotators(conversations)
        judge = judge or self.paths.judge
        judged = read_annotations(Path(judge)) if Path(judge).exists() else None
        failures: List[JudgeFailure] = []
        if judged is not None and self.paths.judge_failures.exists():
            failures = [JudgeFailure.model_validate(f) for f in read_json(self.paths.judge_failures)]
        resolution = resolution or (self.paths.resolution if self.paths.resolution.exists() else None)
        return {
            "first": human_1,
            "second": human_2,
            "judge": judged,
            "judge_failures": failures,
            "resolution": read_annotations(Path(resolution)) if resolution else None,
            "perturbed_items": self.perturbed_items(conversations) if self.paths.perturbations.exists() else None,
        }

    def compute_agreement(self, inputs: Dict[str, object]) -> AgreementBundle:
        agreement = self.settings.agreement
        return compute_agreement(
            inputs["first"],
            inputs["second"],
            judge=inputs["judge"],
            judge_failures=inputs["judge_failures"],
            resolution=inputs["resolution"],
            resamples=agreement.resamples,
            seed=self.settings.seed,
            cluster_by_conversation=agreement.cluster_by_conversation,
            perturbed_items=inputs["perturbed_items"],
        )

    def agree(
        self,
        first: Optional[Path] = None,
        second: Optional[Path] = None,
        judge: Optional[Path] = None,
        resolution: Optional[Path] = None,
    ) -> PipelineResult:
        """Agreement between two annotators and the judge; writes agreement/agreement.json."""
        bundle = self.compute_agreement(self.agreement_inputs(first, second, judge, resolution))
        write_agreement(bundle, self.paths.agreement)
        outputs = {"agreement": str(self.paths.agreement)}
        if not bundle.consensus_complete:
            template = write_resolution_template(bundle.unresolved, self.paths.annotations / "resolution_template.csv")
            outputs["resolution_template"] = str(template)
            print(f"[!] {len(bundle.unresolved)} disagreements unresolved; fill in {template} "
                  f"and pass it as the resolution file")
        self._print_agreement(bundle)
        return PipelineResult(counts={"agreement_reports": len(bundle.medical) + len(bundle.profile)},
                              outputs=outputs)

    def _print_agreement(self, bundle: AgreementBundle) -> None:
        print("\n[Agreement]")
        for report in bundle.medical + bundle.profile:
            print(f"  {report.scope:<22} {report.annotator_a} vs {report.annotator_b}: "
                  f"kappa={format_metric(report.kappa)} micro-F1={format_metric(report.micro_f1)} "
                  f"n={report.n_items}")
        boot = bundle.medical[0].bootstrap if bundle.medical else None
        if boot is not None:
            print(f"  paired bootstrap ({boot.unit}): delta={boot.delta:.4f} p={boot.p_value:.4f} "
                  f"({boot.resamples} resamples)")

    # -------------------------------------------------------------- reporting

    def reference_policy(self) -> Dict[str, str]:
        if self.settings.report.reference_policy:
            return load_reference_policy(Path(self.settings.report.reference_policy))
        return policy_reference(self.references().values(), self.drug_table)

    def build_report(self, metrics: MetricReport, agreement: Optional[AgreementBundle]) -> Dict[str, object]:
        manifest = self.manifest()
        judge = read_annotations(self.paths.judge) if self.paths.judge.exists() else None
        engine = ReportEngine(top_n=self.settings.metrics.rank_top_n)
        tables = engine.build(manifest, metrics, self.reference_policy(), agreement=agreement, judge=judge)
        meta = {
            "design_id": manifest.design_id,
            "seed": manifest.seed,
            "mode": manifest.mode,
            "toolkit_version": manifest.toolkit_version,
        }
        return {"engine": engine, "tables": tables, "meta": meta}

    def report(self) -> PipelineResult:
        """Assemble every report table from the stored stage outputs; writes report/."""
        if not (self.paths.metrics / "conversations.jsonl").exists():
            raise ReportError(f"no metrics in {self.paths.metrics}; run the evaluate stage first")
        metrics = load_metric_report(self.paths.metrics)
        agreement = load_agreement(self.paths.agreement) if self.paths.agreement.exists() else None
        built = self.build_report(metrics, agreement)
        exported = built["engine"].export(built["tables"], self.paths.report,
                                          formats=self.settings.report.formats, meta=built["meta"])
        return PipelineResult(counts={"report_tables": len(built["tables"])},
                              outputs={"report": str(self.paths.report), "files": str(len(exported))})

    def verify(self) -> PipelineResult:
        """Recompute metrics, agreement and report from the logs and diff against report.json."""
        stored_path = self.paths.report / "report.json"
        stored = load_report(stored_path)
        metrics = self.compute_metrics(self.conversations())
        agreement = None
        if self.paths.agreement.exists():
            agreement = self.compute_agreement(self.agreement_inputs())
        built = self.build_report(metrics, agreement)
        differences = diff_reports(stored, report_records(built["tables"], built["meta"]))
        if differences:
            print(f"[!] {len(differences)} differences against {stored_path}")
            for line in differences[:20]:
                print(f"    {line}")
        else:
            print(f"[✓] Recomputed report matches {stored_path}")
        return PipelineResult(success=not differences, counts={"differences": len(differences)},
                              differences=differences)

    # --------------------------------------------------------------- pipeline

    def run(self, design: Optional[ExperimentDesign] = None, skip_perturbation: bool = False) -> PipelineResult:
        """Run every stage in order; stops at the first stage that raises."""
        result = PipelineResult()
        stages = [
            ("Profile Generation", self.gen_profiles),
            ("Perturbation", None if skip_perturbation else self.perturb),
            ("Simulation", lambda: self.simulate(design)),
            ("Evaluation", self.evaluate),
            ("Judge Annotation", self.judge),
            ("Agreement", self.agree),
            ("Report", self.report),
        ]
        try:
            for title, stage in stages:
                if stage is None:
                    print(f"\n[INFO] {title} skipped")
                    continue
                print_section_header(f"patsim - {title}")
                result.merge(stage())
        except PatsimError as e:
            result.success = False
            result.errors.append(str(e))
            print(f"\n[ERROR] Pipeline failed: {e}")
            if logger.isEnabledFor(logging.DEBUG):
                traceback.print_exc()
        print_run_summary("PIPELINE SUMMARY", result.counts, result.outputs)
        return result
