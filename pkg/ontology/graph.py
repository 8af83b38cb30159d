"""Is-a graph over concepts, backed by networkx.

Edges run parent -> child. Parent ids resolve inside the child's vocabulary
unless written in qualified "vocabulary:id" form.
"""
import logging
import math
import re
from typing import Dict, FrozenSet, Iterable, List, Optional, Union

import networkx as nx

from core.errors import ConceptLookupError, OntologyResolutionError, OntologyStructureError
from core.models import ConceptCode, DemographicKind, Vocabulary

from .models import Concept

logger = logging.getLogger("patsim.ontology")

# Ancestor ids that classify a demographic concept
DEMOGRAPHIC_ROOTS = {"gender": DemographicKind.GENDER, "age": DemographicKind.AGE_BIN}

_AGE_RANGE = re.compile(r"(\d+)\s*-\s*(\d+)")
_AGE_OPEN = re.compile(r"(\d+)\s*\+")


class Ontology:
    """Immutable concept DAG with ancestry, distance and lookup queries."""

    def __init__(self, concepts: Iterable[Concept]):
        self._concepts: Dict[ConceptCode, Concept] = {}
        self._by_id: Dict[str, List[ConceptCode]] = {}
        for concept in concepts:
            if concept.code in self._concepts:
                raise OntologyStructureError(f"duplicate concept {concept.code}", code=concept.code.qualified)
            self._concepts[concept.code] = concept
            self._by_id.setdefault(concept.code.id, []).append(concept.code)

        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(sorted(self._concepts))
        for concept in self._concepts.values():
            for raw_parent in concept.parent_ids:
                parent = self._resolve_parent(concept, raw_parent)
                if parent == concept.code:
                    raise OntologyStructureError(
                        f"concept {concept.code} lists itself as parent", code=concept.code.qualified
                    )
                self.graph.add_edge(parent, concept.code)

        if not nx.is_directed_acyclic_graph(self.graph):
            cycle = nx.find_cycle(self.graph)
            start = cycle[0][0]
            raise OntologyStructureError(
                f"is-a cycle through {start}: " + " -> ".join(str(u) for u, _ in cycle),
                code=start.qualified,
            )

        self._undirected = self.graph.to_undirected(as_view=True)
        self._ancestors: Dict[ConceptCode, FrozenSet[ConceptCode]] = {}
        self._descendants: Dict[ConceptCode, FrozenSet[ConceptCode]] = {}
        logger.debug(f"[Ontology] {len(self._concepts)} concepts, {self.graph.number_of_edges()} is-a edges")

    def _resolve_parent(self, concept: Concept, raw_parent: str) -> ConceptCode:
        if ":" in raw_parent:
            try:
                candidate = ConceptCode.parse(raw_parent)
            except ValueError:
                candidate = None
            if candidate is not None and candidate in self._concepts:
                return candidate
        candidate = ConceptCode(id=raw_parent, vocabulary=concept.vocabulary)
        if candidate in self._concepts:
            return candidate
        raise OntologyResolutionError(
            f"parent {raw_parent!r} of {concept.code} does not resolve",
            code=concept.code.qualified,
            parent=raw_parent,
        )

    # ------------------------------------------------------------------ lookup

    def __len__(self) -> int:
        return len(self._concepts)

    def __contains__(self, code: object) -> bool:
        return code in self._concepts

    def get(self, code: ConceptCode) -> Concept:
        try:
            return self._concepts[code]
        except KeyError:
            raise ConceptLookupError(f"unknown concept {code}") from None

    def display_name(self, code: ConceptCode) -> str:
        return self.get(code).display_name

    def concepts(self, vocabulary: Optional[Vocabulary] = None) -> List[Concept]:
        """All concepts sorted by code, optionally restricted to one vocabulary."""
        codes = sorted(self._concepts)
        if vocabulary is not None:
            codes = [c for c in codes if c.vocabulary == vocabulary]
        return [self._concepts[c] for c in codes]

    def codes(self, vocabulary: Optional[Vocabulary] = None) -> List[ConceptCode]:
        return [c.code for c in self.concepts(vocabulary)]

    def resolve(self, raw: Union[str, ConceptCode]) -> ConceptCode:
        """Resolve a bare id (must be unambiguous) or "vocabulary:id"."""
        if isinstance(raw, ConceptCode):
            self.get(raw)
            return raw
        if ":" in raw:
            try:
                code = ConceptCode.parse(raw)
            except ValueError:
                code = None
            if code is not None and code in self._concepts:
                return code
        matches = self._by_id.get(raw, [])
        if len(matches) == 1:
            return matches[0]
        if not matches:
            raise ConceptLookupError(f"unknown concept {raw!r}")
        raise ConceptLookupError(
            f"ambiguous concept id {raw!r}: " + ", ".join(str(m) for m in sorted(matches))
        )

    # --------------------------------------------------------------- hierarchy

    @property
    def roots(self) -> List[ConceptCode]:
        """Concepts without parents, sorted."""
        return sorted(c for c in self.graph.nodes if self.graph.in_degree(c) == 0)

    def parents(self, code: ConceptCode) -> List[ConceptCode]:
        self.get(code)
        return sorted(self.graph.predecessors(code))

    def children(self, code: ConceptCode) -> List[ConceptCode]:
        self.get(code)
        return sorted(self.graph.successors(code))

    def ancestors(self, code: ConceptCode) -> FrozenSet[ConceptCode]:
        """Strict ancestors (transitive parents)."""
        self.get(code)
        cached = self._ancestors.get(code)
        if cached is None:
            cached = frozenset(nx.ancestors(self.graph, code))
            self._ancestors[code] = cached
        return cached

    def descendants(self, code: ConceptCode) -> FrozenSet[ConceptCode]:
        self.get(code)
        cached = self._descendants.get(code)
        if cached is None:
            cached = frozenset(nx.descendants(self.graph, code))
            self._descendants[code] = cached
        return cached

    def is_ancestor_or_descendant(self, a: ConceptCode, b: ConceptCode) -> bool:
        """True when a and b are equal or lie on one directed is-a path."""
        self.get(a)
        self.get(b)
        if a == b:
            return True
        return b in self.ancestors(a) or b in self.descendants(a)

    def hierarchical_distance(self, a: ConceptCode, b: ConceptCode) -> Union[int, float]:
        """Shortest undirected is-a path length; math.inf when disconnected."""
        self.get(a)
        self.get(b)
        try:
            return nx.shortest_path_length(self._undirected, a, b)
        except nx.NetworkXNoPath:
            return math.inf

    # ------------------------------------------------------------ demographics

    def demographic_kind(self, code: ConceptCode) -> Optional[DemographicKind]:
        """GENDER or AGE_BIN for demographic value concepts, else None."""
        if code.vocabulary != Vocabulary.DEMOGRAPHIC or code.id in DEMOGRAPHIC_ROOTS:
            return None
        ancestor_ids = {a.id for a in self.ancestors(code)}
        for root_id, kind in DEMOGRAPHIC_ROOTS.items():
            if root_id in ancestor_ids:
                return kind
        return None

    def fact_text(self, code: ConceptCode) -> str:
        """Text of a profile fact: "Age: 34", "Gender: Male" or the display name."""
        name = self.display_name(code)
        kind = self.demographic_kind(code)
        if kind == DemographicKind.GENDER:
            return f"Gender: {name}"
        if kind == DemographicKind.AGE_BIN:
            return f"Age: {age_bin_midpoint(name)}"
        return name


def age_bin_midpoint(display_name: str) -> str:
    """Integer midpoint of an "lo-hi" age bin, or the lower bound of "lo+".

    Falls back to the display name when no range is present.
    """
    match = _AGE_RANGE.search(display_name)
    if match:
        lo, hi = int(match.group(1)), int(match.group(2))
        return str((lo + hi) // 2)
    match = _AGE_OPEN.search(display_name)
    if match:
        return match.group(1)
    return display_name
