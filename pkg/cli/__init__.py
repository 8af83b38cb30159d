"""CLI module for patsim."""
from .args import create_parser, parse_args
from .commands import COMMANDS, load_settings

__all__ = [
    "COMMANDS",
    "create_parser",
    "load_settings",
    "parse_args",
]
