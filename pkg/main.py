#!/usr/bin/env python3
"""patsim - Patient simulator and evaluation toolkit for conversational decision aids.

Usage:
    patsim gen-profiles                 # Generate profiles, select the cohort
    patsim perturb                      # Inject controlled errors
    patsim simulate --design d.yaml     # Run simulated conversations
    patsim evaluate                     # Metrics over the logs
    patsim judge                        # LLM-judge annotation
    patsim agree --a a.csv --b b.csv    # Agreement and bootstrap test
    patsim report                       # Report tables
    patsim verify                       # Recompute and diff the report
    patsim run                          # Everything above in order
    patsim config init                  # Create default config file
"""
import os
import sys
import logging
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

LOGGER_NAMES = [
    "patsim.ontology", "patsim.cohort", "patsim.profilegen", "patsim.perturbation",
    "patsim.orchestrator", "patsim.ports", "patsim.metrics", "patsim.agreement",
    "patsim.reporting", "patsim.pipeline",
]


def configure_logging(verbose: bool = False):
    """Configure logging based on verbosity.

    Args:
        verbose: If True, enable debug logging for patsim modules
    """
    debug_mode = verbose or os.environ.get("PATSIM_DEBUG", "").lower() in ("1", "true", "yes")

    level = logging.DEBUG if debug_mode else logging.WARNING

    for logger_name in LOGGER_NAMES:
        logger = logging.getLogger(logger_name)
        logger.setLevel(level)
        if not logger.handlers:
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter("%(message)s"))
            logger.addHandler(handler)


def main():
    """Main entry point - routes to subcommands."""
    from cli.args import parse_args
    from cli.commands import COMMANDS

    args = parse_args()

    verbose = getattr(args, 'verbose', False)
    configure_logging(verbose)

    handler = COMMANDS.get(args.command)
    if handler:
        exit_code = handler(args)
        sys.exit(exit_code)
    else:
        print(f"Unknown command: {args.command}")
        sys.exit(1)


if __name__ == "__main__":
    main()
