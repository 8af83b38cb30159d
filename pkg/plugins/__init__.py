"""patsim port plugins."""
from .ports import PortKind, PortRegistry

__all__ = ["PortKind", "PortRegistry"]
