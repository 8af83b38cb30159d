"""Concept ontology: loading, is-a queries, lexicon and similarity."""
from .graph import Ontology, age_bin_midpoint
from .lexicon import Lexicon, build_lexicon, match_medical_terms, tokenize
from .loader import load_ontology, write_ontology
from .models import Concept, TermMatch
from .similarity import SimilarityIndex, cosine, similarity_index

__all__ = [
    "Concept",
    "Lexicon",
    "Ontology",
    "SimilarityIndex",
    "TermMatch",
    "age_bin_midpoint",
    "build_lexicon",
    "cosine",
    "load_ontology",
    "match_medical_terms",
    "similarity_index",
    "tokenize",
    "write_ontology",
]
