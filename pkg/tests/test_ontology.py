import math

import networkx as nx
import pytest
from hypothesis import given, strategies as st

from core.errors import ConceptLookupError, OntologyResolutionError, OntologyStructureError
from core.models import ConceptCode, DemographicKind, Vocabulary
from ontology import (
    Concept,
    Lexicon,
    Ontology,
    age_bin_midpoint,
    build_lexicon,
    load_ontology,
    match_medical_terms,
    similarity_index,
    tokenize,
    write_ontology,
)


def dx(cid: str, name: str = "", parents=()) -> Concept:
    return Concept(code=ConceptCode(cid, Vocabulary.DIAGNOSIS), display_name=name or cid, parent_ids=tuple(parents))


def code(cid: str) -> ConceptCode:
    return ConceptCode(cid, Vocabulary.DIAGNOSIS)


@pytest.fixture
def diamond():
    #   a
    #  / \
    # b   c
    #  \ /
    #   d     e (isolated)
    return Ontology([dx("a"), dx("b", parents=["a"]), dx("c", parents=["a"]), dx("d", parents=["b", "c"]), dx("e")])


class TestStructure:
    def test_cycle_rejected(self):
        with pytest.raises(OntologyStructureError):
            Ontology([dx("a", parents=["b"]), dx("b", parents=["a"])])

    def test_self_parent_rejected(self):
        with pytest.raises(OntologyStructureError):
            Ontology([dx("a", parents=["a"])])

    def test_duplicate_rejected(self):
        with pytest.raises(OntologyStructureError):
            Ontology([dx("a"), dx("a")])

    def test_dangling_parent(self):
        with pytest.raises(OntologyResolutionError) as info:
            Ontology([dx("a", parents=["missing"])])
        assert info.value.parent == "missing"

    def test_qualified_parent_crosses_vocabulary(self):
        ontology = Ontology([
            dx("root"),
            Concept(ConceptCode("m", Vocabulary.MEDICATION), "M", ("diagnosis:root",)),
        ])
        assert ontology.parents(ConceptCode("m", Vocabulary.MEDICATION)) == [code("root")]


class TestHierarchy:
    def test_ancestors_and_descendants(self, diamond):
        assert diamond.ancestors(code("d")) == {code("a"), code("b"), code("c")}
        assert diamond.descendants(code("a")) == {code("b"), code("c"), code("d")}
        assert diamond.ancestors(code("a")) == frozenset()

    def test_siblings_are_unrelated(self, diamond):
        assert not diamond.is_ancestor_or_descendant(code("b"), code("c"))
        assert diamond.is_ancestor_or_descendant(code("d"), code("a"))
        assert diamond.is_ancestor_or_descendant(code("b"), code("b"))

    def test_distance(self, diamond):
        assert diamond.hierarchical_distance(code("b"), code("c")) == 2
        assert diamond.hierarchical_distance(code("d"), code("a")) == 2
        assert diamond.hierarchical_distance(code("a"), code("e")) == math.inf

    def test_unknown_code(self, diamond):
        with pytest.raises(ConceptLookupError):
            diamond.ancestors(code("zzz"))
        with pytest.raises(LookupError):
            diamond.get(code("zzz"))

    def test_resolve_bare_and_qualified(self, diamond):
        assert diamond.resolve("b") == code("b")
        assert diamond.resolve("diagnosis:b") == code("b")

    def test_resolve_ambiguous(self):
        ontology = Ontology([dx("x"), Concept(ConceptCode("x", Vocabulary.PROCEDURE), "X")])
        with pytest.raises(ConceptLookupError):
            ontology.resolve("x")


@st.composite
def random_dags(draw):
    n = draw(st.integers(min_value=2, max_value=14))
    concepts = []
    for i in range(n):
        parents = draw(st.lists(st.integers(min_value=0, max_value=max(0, i - 1)), max_size=3, unique=True)) if i else []
        concepts.append(dx(f"n{i}", parents=[f"n{p}" for p in parents]))
    return concepts


@given(random_dags())
def test_ancestry_matches_brute_force_reachability(concepts):
    ontology = Ontology(concepts)
    edges = {(p, c.id) for c in concepts for p in c.parent_ids}

    def reachable(src: str) -> set:
        seen, stack = set(), [src]
        while stack:
            node = stack.pop()
            for parent, child in edges:
                if parent == node and child not in seen:
                    seen.add(child)
                    stack.append(child)
        return seen

    for concept in concepts:
        expected = {code(c) for c in reachable(concept.id)}
        assert ontology.descendants(concept.code) == expected
        for other in expected:
            assert concept.code in ontology.ancestors(other)


@given(random_dags())
def test_distance_is_symmetric_shortest_path(concepts):
    ontology = Ontology(concepts)
    graph = nx.Graph()
    graph.add_nodes_from(c.code for c in concepts)
    graph.add_edges_from((code(p), c.code) for c in concepts for p in c.parent_ids)
    a, b = concepts[0].code, concepts[-1].code
    try:
        expected = nx.shortest_path_length(graph, a, b)
    except nx.NetworkXNoPath:
        expected = math.inf
    assert ontology.hierarchical_distance(a, b) == expected == ontology.hierarchical_distance(b, a)


class TestDemographics:
    def test_kinds_from_hierarchy(self, ontology):
        genders = [c for c in ontology.codes(Vocabulary.DEMOGRAPHIC) if ontology.demographic_kind(c) == DemographicKind.GENDER]
        ages = [c for c in ontology.codes(Vocabulary.DEMOGRAPHIC) if ontology.demographic_kind(c) == DemographicKind.AGE_BIN]
        assert genders and ages
        assert ontology.demographic_kind(ConceptCode("gender", Vocabulary.DEMOGRAPHIC)) is None

    def test_fact_text(self, ontology):
        for c in ontology.codes(Vocabulary.DEMOGRAPHIC):
            kind = ontology.demographic_kind(c)
            if kind == DemographicKind.GENDER:
                assert ontology.fact_text(c).startswith("Gender: ")
            elif kind == DemographicKind.AGE_BIN:
                assert ontology.fact_text(c).startswith("Age: ")

    @pytest.mark.parametrize("name,expected", [("Age 30-39", "34"), ("Age 18-24", "21"), ("Age 80+", "80"), ("Adult", "Adult")])
    def test_age_midpoint(self, name, expected):
        assert age_bin_midpoint(name) == expected


class TestLexicon:
    def test_tokenize_strips_punctuation(self):
        assert tokenize("Beta-blocker, taken DAILY!") == ["betablocker", "taken", "daily"]

    def test_longest_match_wins(self):
        lexicon = Lexicon(terms={
            ("major", "depressive", "disorder"): code("mdd"),
            ("depressive",): code("dep"),
            ("disorder",): code("dis"),
        })
        matches = match_medical_terms("I have major depressive disorder and a disorder", lexicon)
        assert [m.code for m in matches] == [code("mdd"), code("dis")]
        assert (matches[0].start, matches[0].end) == (2, 5)

    def test_built_from_display_names(self, ontology, lexicon):
        concept = ontology.concepts(Vocabulary.DIAGNOSIS)[3]
        assert lexicon.lookup(concept.display_name) is not None

    def test_long_terms_dropped(self):
        ontology = Ontology([dx("long", "one two three four five six seven"), dx("short", "one two")])
        lexicon = build_lexicon(ontology, max_tokens=6)
        assert "one two" in lexicon
        assert "one two three four five six seven" not in lexicon


def test_concept_table_round_trip(tmp_path, ontology):
    path = write_ontology(ontology, tmp_path / "concepts.csv")
    loaded = load_ontology(path)
    assert loaded.codes() == ontology.codes()
    for c in ontology.codes():
        assert loaded.parents(c) == ontology.parents(c)


def test_concept_table_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,vocabulary\nx,diagnosis\n", encoding="utf-8")
    with pytest.raises(OntologyStructureError):
        load_ontology(path)


def test_similarity_nearest_excludes_self(ontology, embedder):
    index = similarity_index(ontology, embedder)
    target = ontology.codes(Vocabulary.DIAGNOSIS)[5]
    neighbours = index.nearest(target, 5)
    assert target not in [c for c, _ in neighbours]
    scores = [s for _, s in neighbours]
    assert scores == sorted(scores, reverse=True)
    assert all(c.vocabulary == Vocabulary.DIAGNOSIS for c, _ in neighbours)


def test_multi_parent_row(tmp_path):
    path = tmp_path / "concepts.csv"
    path.write_text(
        "id,vocabulary,display_name,parent_ids\n"
        "a,diagnosis,Alpha,\n"
        "b,diagnosis,Beta,\n"
        "c,diagnosis,Gamma,a|b\n",
        encoding="utf-8",
    )
    loaded = load_ontology(path)
    assert loaded.parents(code("c")) == [code("a"), code("b")]
    assert loaded.roots == [code("a"), code("b")]
    assert loaded.is_ancestor_or_descendant(code("a"), code("c"))


def test_chain_has_single_root(tmp_path):
    path = tmp_path / "chain.csv"
    path.write_text(
        "id,vocabulary,display_name,parent_ids\n"
        "C,diagnosis,Gamma,B\n"
        "B,diagnosis,Beta,A\n"
        "A,diagnosis,Alpha,\n",
        encoding="utf-8",
    )
    assert load_ontology(path).roots == [code("A")]
