"""CLI argument parsing."""
import argparse

# Import defaults from config - single source of truth
from config import Defaults


# =============================================================================
# Shared Argument Helpers
# =============================================================================

def _add_common_args(parser) -> None:
    """Options every subcommand accepts."""
    parser.add_argument(
        "--config",
        metavar="FILE",
        default=None,
        help="Config file (default: search ./patsim.yaml, ~/.patsim/config.yaml, ...)"
    )
    parser.add_argument(
        "--seed",
        metavar="N",
        type=int,
        default=None,
        help=f"Root random seed (default: config, else {Defaults.SEED})"
    )
    parser.add_argument(
        "--run-dir",
        metavar="PATH",
        default=None,
        help="Run directory (default: output.run_dir from config)"
    )
    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Enable debug logging"
    )
    parser.add_argument(
        "--no-progress",
        action="store_true",
        help="Hide progress bars"
    )


def _add_generation_args(parser_or_group) -> None:
    """Profile generation arguments, shared by 'gen-profiles' and 'run'."""
    parser_or_group.add_argument(
        "--outcome",
        metavar="ID",
        default=None,
        help="Outcome concept id (default: the most treated outcome)"
    )
    parser_or_group.add_argument(
        "--n-profiles",
        metavar="N",
        type=int,
        default=None,
        help=f"Profiles to generate (default: {Defaults.N_PROFILES})"
    )
    parser_or_group.add_argument(
        "--cohort-size",
        metavar="N",
        type=int,
        default=None,
        help=f"Profiles kept by sigma-band selection (default: {Defaults.COHORT_SIZE})"
    )


def _add_simulation_args(parser_or_group) -> None:
    """Simulation arguments, shared by 'simulate' and 'run'."""
    parser_or_group.add_argument(
        "--design",
        metavar="FILE",
        default=None,
        help="Experiment design YAML (default: the full three-setting design)"
    )
    parser_or_group.add_argument(
        "--mode",
        choices=["stub", "live"],
        default=None,
        help="stub: offline ports; live: OpenAI-compatible patient and HTTP decision aid"
    )
    parser_or_group.add_argument(
        "--max-turns",
        metavar="N",
        type=int,
        default=None,
        help=f"Patient turns before abort (default: {Defaults.MAX_TURNS})"
    )
    parser_or_group.add_argument(
        "--workers", "-w",
        metavar="N",
        type=int,
        default=None,
        help=f"Concurrent conversations (default: {Defaults.SIM_WORKERS})"
    )


def _add_agreement_args(parser_or_group) -> None:
    """Agreement arguments, shared by 'agree' and 'run'."""
    parser_or_group.add_argument(
        "--resamples",
        metavar="N",
        type=int,
        default=None,
        help=f"Paired bootstrap resamples (default: {Defaults.BOOTSTRAP_RESAMPLES})"
    )
    parser_or_group.add_argument(
        "--cluster-by-conversation",
        action="store_true",
        help="Resample whole conversations instead of items"
    )


# ============================================================================
# Subcommand Parsers
# ============================================================================

def _add_gen_profiles_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "gen-profiles",
        help="Generate medical profiles and select the cohort",
        description="Generate profiles from cohort statistics, then select a sigma-band cohort."
    )
    _add_generation_args(parser)
    _add_common_args(parser)
    parser.set_defaults(command="gen-profiles")


def _add_perturb_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "perturb",
        help="Inject controlled errors into the selected profiles",
        description="Replace a share of profile facts with similar but unrelated concepts."
    )
    parser.add_argument(
        "--target-fraction",
        metavar="F",
        type=float,
        default=None,
        help=f"Share of eligible facts replaced (default: {Defaults.PERTURB_FRACTION})"
    )
    parser.add_argument(
        "--min-distance",
        metavar="N",
        type=int,
        default=None,
        help=f"Minimum is-a distance to the original (default: {Defaults.MIN_DISTANCE})"
    )
    _add_common_args(parser)
    parser.set_defaults(command="perturb")


def _add_simulate_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "simulate",
        help="Run simulated patient conversations",
        description="Run every conversation of an experiment design against the decision aid."
    )
    _add_simulation_args(parser)
    _add_common_args(parser)
    parser.set_defaults(command="simulate")


def _add_evaluate_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "evaluate",
        help="Compute metrics over conversation logs",
        description="Readability, linguistic, behavioral and retrieval metrics per conversation and cell."
    )
    parser.add_argument(
        "--fkgl-backend",
        choices=["heuristic", "textstat"],
        default=None,
        help=f"Readability backend (default: {Defaults.FKGL_BACKEND})"
    )
    parser.add_argument(
        "--reference-scope",
        choices=["expressed", "profile"],
        default=None,
        help="Reference concepts for recall: those the patient expressed, or the whole profile"
    )
    _add_common_args(parser)
    parser.set_defaults(command="evaluate")


def _add_judge_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "judge",
        help="Annotate conversations with an LLM judge",
        description="Label every cited profile fact as ACCURATE, INACCURATE or UNSUPPORTED."
    )
    parser.add_argument(
        "--template",
        metavar="FILE",
        default=None,
        help="Judge prompt template (default: built-in)"
    )
    parser.add_argument(
        "--mode",
        choices=["stub", "live"],
        default=None,
        help="stub: answer-key judge; live: OpenAI-compatible chat model"
    )
    _add_common_args(parser)
    parser.set_defaults(command="judge")


def _add_agree_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "agree",
        help="Inter-annotator and judge agreement",
        description="Cohen's kappa, micro-F1, adjudication and the paired bootstrap test.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Annotation files are CSV with columns conversation,turn,key,annotator,label
(label ABSTAIN or empty for an abstention). Without --a/--b, stand-in
annotators are simulated from the perturbation answer key.
        """
    )
    parser.add_argument("--a", metavar="FILE", default=None, help="First annotator file")
    parser.add_argument("--b", metavar="FILE", default=None, help="Second annotator file")
    parser.add_argument("--judge", metavar="FILE", default=None, help="Judge annotation file")
    parser.add_argument("--resolution", metavar="FILE", default=None, help="Adjudicated labels for disagreements")
    _add_agreement_args(parser)
    _add_common_args(parser)
    parser.set_defaults(command="agree")


def _add_report_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "report",
        help="Build the report tables",
        description="Assemble agreement, metric, retrieval and recommendation tables."
    )
    parser.add_argument(
        "--formats",
        metavar="FORMATS",
        default=None,
        help="Export formats: csv,json (comma-separated, default: config)"
    )
    parser.add_argument(
        "--reference-policy",
        metavar="FILE",
        default=None,
        help="CSV profile_id,recommendation (default: policy on the full profile)"
    )
    _add_common_args(parser)
    parser.set_defaults(command="report")


def _add_verify_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "verify",
        help="Recompute the report and diff it against report.json",
        description="Recompute metrics, agreement and tables from the logs and compare with the stored report."
    )
    _add_common_args(parser)
    parser.set_defaults(command="verify")


def _add_run_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "run",
        help="Run the complete pipeline",
        description="gen-profiles, perturb, simulate, evaluate, judge, agree and report in one go."
    )
    generation = parser.add_argument_group("Profile generation")
    _add_generation_args(generation)
    perturbation = parser.add_argument_group("Perturbation")
    perturbation.add_argument(
        "--skip-perturbation",
        action="store_true",
        help="Simulate the unperturbed cohort"
    )
    simulation = parser.add_argument_group("Simulation")
    _add_simulation_args(simulation)
    agreement = parser.add_argument_group("Agreement")
    _add_agreement_args(agreement)
    _add_common_args(parser)
    parser.set_defaults(command="run")


def _add_config_parser(subparsers) -> None:
    """Add 'config' subcommand for configuration management."""
    parser = subparsers.add_parser(
        "config",
        help="Manage configuration",
        description="Generate or show configuration file."
    )
    parser.add_argument(
        "action",
        choices=["init", "show", "path"],
        nargs="?",
        default="show",
        help="Action: init (create config file), show (display current config), path (show config file location)"
    )
    parser.add_argument(
        "-o", "--output",
        metavar="PATH",
        type=str,
        default="./patsim.yaml",
        help="Output path for config file (default: ./patsim.yaml)"
    )
    parser.add_argument(
        "--force",
        action="store_true",
        help="Overwrite an existing file without asking"
    )
    _add_common_args(parser)
    parser.set_defaults(command="config")


# ============================================================================
# Main Parser
# ============================================================================

def create_parser() -> argparse.ArgumentParser:
    """Create the main argument parser with subcommands."""
    parser = argparse.ArgumentParser(
        prog="patsim",
        description="patsim - Patient simulator and evaluation toolkit for conversational decision aids",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Subcommands:
  gen-profiles  Generate medical profiles and select the cohort
  perturb       Inject controlled errors into the selected profiles
  simulate      Run simulated patient conversations
  evaluate      Compute metrics over conversation logs
  judge         Annotate conversations with an LLM judge
  agree         Inter-annotator and judge agreement
  report        Build the report tables
  verify        Recompute the report and diff it against report.json
  run           Run the complete pipeline
  config        Manage configuration file

Examples:
  # Generate default config file
  patsim config init

  # Offline end-to-end run on a synthetic world
  patsim run --run-dir output/demo --n-profiles 100 --cohort-size 20

  # Stage by stage
  patsim gen-profiles --run-dir output/demo
  patsim perturb --run-dir output/demo
  patsim simulate --run-dir output/demo --design design.yaml -w 8
  patsim evaluate --run-dir output/demo --fkgl-backend textstat
  patsim judge --run-dir output/demo --mode live
  patsim agree --run-dir output/demo --a ann1.csv --b ann2.csv --cluster-by-conversation
  patsim report --run-dir output/demo --formats csv,json
  patsim verify --run-dir output/demo
        """
    )

    subparsers = parser.add_subparsers(
        title="commands",
        dest="command",
        metavar="<command>"
    )

    _add_gen_profiles_parser(subparsers)
    _add_perturb_parser(subparsers)
    _add_simulate_parser(subparsers)
    _add_evaluate_parser(subparsers)
    _add_judge_parser(subparsers)
    _add_agree_parser(subparsers)
    _add_report_parser(subparsers)
    _add_verify_parser(subparsers)
    _add_run_parser(subparsers)
    _add_config_parser(subparsers)

    return parser


def parse_args(argv=None) -> argparse.Namespace:
    """Parse command line arguments.

    Returns:
        Parsed arguments namespace
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    # If no command specified, show help
    if not args.command:
        parser.print_help()
        raise SystemExit(0)

    return args
