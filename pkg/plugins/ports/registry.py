"""Port registry.

Ports register under (kind, name). Shared ports (embedders, classifiers,
live clients) are cached by `get`; per-conversation ports (the stub
patient, the stub decision aid) are built fresh by `create`.
"""
from typing import Dict, List, Optional, Tuple, Type

from .base import Port, PortKind


class PortRegistry:
    """Registry for port implementations.

    Example:
        PortRegistry.register(HashEmbedder)
        embedder = PortRegistry.get(PortKind.EMBEDDING, "hash", dimension=64)
    """

    _ports: Dict[Tuple[PortKind, str], Type[Port]] = {}
    _instances: Dict[Tuple[PortKind, str], Port] = {}

    @classmethod
    def register(cls, port_class: Type[Port]) -> Type[Port]:
        """Register a port class; usable as a class decorator.

        Raises:
            ValueError: If a different class already holds the same (kind, name)
        """
        key = (port_class.kind, port_class.name)
        if key in cls._ports and cls._ports[key] is not port_class:
            raise ValueError(f"Port '{port_class.kind.value}/{port_class.name}' already registered")
        cls._ports[key] = port_class
        return port_class

    @classmethod
    def unregister(cls, kind: PortKind, name: str) -> None:
        cls._ports.pop((kind, name), None)
        cls._instances.pop((kind, name), None)

    @classmethod
    def get_class(cls, kind: PortKind, name: str) -> Type[Port]:
        """Get a port class by kind and name.

        Raises:
            KeyError: If nothing is registered under that name
        """
        try:
            return cls._ports[(PortKind(kind), name)]
        except KeyError:
            known = ", ".join(cls.names(kind)) or "none"
            raise KeyError(f"No {PortKind(kind).value} port named '{name}' (known: {known})") from None

    @classmethod
    def create(cls, kind: PortKind, name: str, **kwargs) -> Port:
        """Build a new port instance."""
        return cls.get_class(kind, name)(**kwargs)

    @classmethod
    def get(cls, kind: PortKind, name: str, **kwargs) -> Port:
        """Get a cached instance, rebuilding it when kwargs are given."""
        key = (PortKind(kind), name)
        if key not in cls._instances or kwargs:
            cls._instances[key] = cls.create(kind, name, **kwargs)
        return cls._instances[key]

    @classmethod
    def names(cls, kind: Optional[PortKind] = None) -> List[str]:
        return sorted(
            name for (k, name) in cls._ports if kind is None or k == PortKind(kind)
        )

    @classmethod
    def clear_instances(cls) -> None:
        cls._instances.clear()

    @classmethod
    def info(cls) -> Dict[str, Dict]:
        """Describe every registered port, keyed "kind/name"."""
        return {
            f"{kind.value}/{name}": {
                "description": port.description,
                "requires_auth": port.requires_auth,
                "concurrent_safe": port.concurrent_safe,
            }
            for (kind, name), port in sorted(cls._ports.items(), key=lambda kv: (kv[0][0].value, kv[0][1]))
        }
