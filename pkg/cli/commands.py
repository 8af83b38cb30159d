"""CLI subcommand implementations."""
import logging
from pathlib import Path
from typing import Any, Callable, Dict

from config.settings import Settings
from core.errors import PatsimError
from core.formatting import print_run_summary, print_section_header

logger = logging.getLogger("patsim.pipeline")


def _overrides(args) -> Dict[str, Any]:
    """Nested settings overrides from whichever options the subcommand defines."""
    mapping = {
        "seed": ("seed",),
        "outcome": ("generation", "outcome"),
        "n_profiles": ("generation", "n_profiles"),
        "cohort_size": ("generation", "cohort_size"),
        "target_fraction": ("perturbation", "target_fraction"),
        "min_distance": ("perturbation", "min_distance"),
        "design": ("simulation", "design"),
        "mode": ("simulation", "mode"),
        "max_turns": ("simulation", "max_turns"),
        "workers": ("simulation", "workers"),
        "fkgl_backend": ("metrics", "fkgl_backend"),
        "reference_scope": ("metrics", "reference_scope"),
        "template": ("agreement", "judge_template"),
        "resamples": ("agreement", "resamples"),
        "reference_policy": ("report", "reference_policy"),
    }
    overrides: Dict[str, Any] = {}
    for arg, path in mapping.items():
        value = getattr(args, arg, None)
        if value is None:
            continue
        target = overrides
        for part in path[:-1]:
            target = target.setdefault(part, {})
        target[path[-1]] = value
    if getattr(args, "cluster_by_conversation", False):
        overrides.setdefault("agreement", {})["cluster_by_conversation"] = True
    formats = getattr(args, "formats", None)
    if formats:
        parsed = [f.strip().lower() for f in formats.split(",")]
        overrides.setdefault("report", {})["formats"] = [f for f in parsed if f in ("csv", "json")]
    return overrides


def load_settings(args) -> Settings:
    """Config file and environment, with CLI options on top."""
    from config.settings import get_settings, settings_with_overrides

    settings = get_settings(getattr(args, "config", None))
    overrides = _overrides(args)
    return settings_with_overrides(settings, overrides) if overrides else settings


def _runner(args):
    from pipeline.runner import PipelineRunner

    settings = load_settings(args)
    run_dir = Path(args.run_dir) if getattr(args, "run_dir", None) else None
    return PipelineRunner(settings, run_dir, show_progress=not getattr(args, "no_progress", False))


def _run_stage(args, title: str, stage: Callable) -> int:
    """Run one runner stage with the shared header, summary and error handling."""
    try:
        runner = _runner(args)
        print_section_header(f"patsim - {title}")
        print(f"[*] Run directory: {runner.paths.root}")
        result = stage(runner)
    except PatsimError as e:
        print(f"\n[ERROR] {e}")
        logger.debug("stage failed", exc_info=True)
        return 1
    print_run_summary(f"{title.upper()} COMPLETE" if result.success else f"{title.upper()} FINISHED WITH ERRORS",
                      result.counts, result.outputs)
    return 0 if result.success else 1


def cmd_gen_profiles(args) -> int:
    """Generate profiles and select the sigma-band cohort.

    Returns:
        Exit code (0 = success, 1 = any profile failed or an error)
    """
    return _run_stage(args, "Profile Generation", lambda runner: runner.gen_profiles())


def cmd_perturb(args) -> int:
    return _run_stage(args, "Perturbation", lambda runner: runner.perturb())


def cmd_simulate(args) -> int:
    """Run the experiment design; exit code 1 when a conversation failed hard."""
    return _run_stage(args, "Simulation", lambda runner: runner.simulate())


def cmd_evaluate(args) -> int:
    return _run_stage(args, "Evaluation", lambda runner: runner.evaluate())


def cmd_judge(args) -> int:
    return _run_stage(args, "Judge Annotation", lambda runner: runner.judge())


def cmd_agree(args) -> int:
    """Agreement between two annotator files and the judge.

    Missing files are reported before anything runs.
    """
    for name in ("a", "b", "judge", "resolution"):
        value = getattr(args, name, None)
        if value and not Path(value).exists():
            print(f"[ERROR] Annotation file not found: {value}")
            return 1
    if bool(getattr(args, "a", None)) != bool(getattr(args, "b", None)):
        print("[ERROR] --a and --b must be given together")
        return 1

    def optional(name: str):
        value = getattr(args, name, None)
        return Path(value) if value else None

    return _run_stage(args, "Agreement", lambda runner: runner.agree(
        first=optional("a"),
        second=optional("b"),
        judge=optional("judge"),
        resolution=optional("resolution"),
    ))


def cmd_report(args) -> int:
    return _run_stage(args, "Report", lambda runner: runner.report())


def cmd_verify(args) -> int:
    """Recompute the report and diff it; exit code 1 on any difference."""
    return _run_stage(args, "Verify", lambda runner: runner.verify())


def cmd_run(args) -> int:
    """Run the complete pipeline.

    Returns:
        Exit code (0 = success)
    """
    try:
        runner = _runner(args)
    except PatsimError as e:
        print(f"\n[ERROR] {e}")
        return 1
    print(f"[*] Run directory: {runner.paths.root}")
    result = runner.run(skip_perturbation=getattr(args, "skip_perturbation", False))
    return 0 if result.success else 1


def cmd_config(args) -> int:
    """Manage configuration.

    Args:
        args: Parsed arguments with action (init, show, path)

    Returns:
        Exit code (0 = success)
    """
    from config.settings import create_default_config_file, find_config_file

    action = getattr(args, 'action', 'show')

    if action == "init":
        output_path = Path(args.output)
        if output_path.exists() and not getattr(args, "force", False):
            print(f"[!] Config file already exists: {output_path}")
            response = input("Overwrite? [y/N]: ").strip().lower()
            if response != 'y':
                print("Cancelled.")
                return 1

        created_path = create_default_config_file(output_path)
        print(f"\n[✓] Created config file: {created_path}")
        print("\nEdit this file to customize:")
        print("  - Generation gate band and cohort size")
        print("  - Perturbation fraction and minimum distance")
        print("  - Simulation mode, limits and workers")
        print("  - Metric backends and bootstrap resamples")
        print("\nLive ports read their endpoints and keys from environment variables:")
        print("  export PATSIM_CHAT_API_KEY='your-key'      # or OPENAI_API_KEY")
        print("  export PATSIM_SUT_BASE_URL='https://aid.example.org'")
        print("  export PATSIM_DEPRESSION_URL / PATSIM_TOXICITY_URL")
        return 0

    elif action == "show":
        settings = load_settings(args)

        print("\n" + "=" * 70)
        print("CURRENT CONFIGURATION")
        print("=" * 70)

        config_file = Path(args.config) if getattr(args, "config", None) else find_config_file()
        print(f"Config file: {config_file}" if config_file else "Config file: None (using defaults)")
        print(f"Seed: {settings.seed}")

        print("\n[World]")
        print(f"  Concept table: {settings.ontology.concept_table or 'synthetic'}")
        print(f"  Cohort:        {settings.cohort.records or 'synthetic'}")

        print("\n[Generation]")
        gen = settings.generation
        print(f"  Profiles:      {gen.n_profiles} (cohort of {gen.cohort_size})")
        print(f"  Gate band:     ({gen.rr_low:.3f}, {gen.rr_high}]")
        print(f"  Diversity:     > {gen.diversity_threshold}, at most {gen.max_residual_additions} additions")

        print("\n[Perturbation]")
        print(f"  Target fraction: {settings.perturbation.target_fraction}")
        print(f"  Min distance:    {settings.perturbation.min_distance}")

        print("\n[Simulation]")
        sim = settings.simulation
        print(f"  Mode:       {sim.mode}")
        print(f"  Max turns:  {sim.max_turns}")
        print(f"  Workers:    {sim.workers}")
        print(f"  Design:     {sim.design or 'full'}")

        print("\n[Metrics / Agreement]")
        print(f"  FKGL backend: {settings.metrics.fkgl_backend}")
        print(f"  Embedder:     {settings.metrics.embedder}")
        print(f"  Resamples:    {settings.agreement.resamples}")

        print("\n[Ports]")
        api = settings.api
        for label, value in (
            ("PATSIM_CHAT_API_KEY", api.chat_api_key),
            ("PATSIM_SUT_BASE_URL", api.sut_base_url),
            ("PATSIM_EMBEDDING_API_KEY", api.embedding_api_key),
            ("PATSIM_DEPRESSION_URL", api.depression_url),
            ("PATSIM_TOXICITY_URL", api.toxicity_url),
        ):
            print(f"  {label:<26} {'✓ Set' if value else '✗ Not set'}")

        print("=" * 70)
        return 0

    elif action == "path":
        config_file = find_config_file()
        if config_file:
            print(config_file)
        else:
            print("No config file found. Create one with: patsim config init")
        return 0

    return 1


COMMANDS: Dict[str, Callable] = {
    "gen-profiles": cmd_gen_profiles,
    "perturb": cmd_perturb,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "judge": cmd_judge,
    "agree": cmd_agree,
    "report": cmd_report,
    "verify": cmd_verify,
    "run": cmd_run,
    "config": cmd_config,
}
