"""Tokenizer, term lexicon and greedy longest-match term finder.

Tokenization: lowercase, split on whitespace, strip every non-word
character from each token, drop empty tokens. "Beta-blocker" therefore
becomes the single token "betablocker".
"""
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

from core.models import FEATURE_VOCABULARIES, ConceptCode, Vocabulary

from .graph import Ontology
from .models import TermMatch

logger = logging.getLogger("patsim.ontology")

MAX_TERM_TOKENS = 6
_NON_WORD = re.compile(r"[^\w]+")


def tokenize(text: str) -> List[str]:
    tokens = []
    for raw in text.lower().split():
        token = _NON_WORD.sub("", raw)
        if token:
            tokens.append(token)
    return tokens


def normalize_term(text: str) -> str:
    return " ".join(tokenize(text))


@dataclass
class Lexicon:
    """Normalized display-name terms mapped to concepts."""
    terms: Dict[Tuple[str, ...], ConceptCode] = field(default_factory=dict)
    max_tokens: int = MAX_TERM_TOKENS

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return tuple(tokenize(term)) in self.terms

    def lookup(self, term: str):
        return self.terms.get(tuple(tokenize(term)))


def build_lexicon(
    ontology: Ontology,
    vocabularies: Iterable[Vocabulary] = FEATURE_VOCABULARIES,
    max_tokens: int = MAX_TERM_TOKENS,
) -> Lexicon:
    """Build a lexicon from display names of the given vocabularies.

    Terms longer than max_tokens are dropped. When two concepts normalize to
    the same term the smallest code keeps it.
    """
    lexicon = Lexicon(max_tokens=max_tokens)
    for vocabulary in vocabularies:
        for concept in ontology.concepts(vocabulary):
            key = tuple(tokenize(concept.display_name))
            if not key or len(key) > max_tokens:
                continue
            existing = lexicon.terms.get(key)
            if existing is not None:
                if concept.code < existing:
                    lexicon.terms[key] = concept.code
                logger.debug(f"[Lexicon] term '{' '.join(key)}' shared by {existing} and {concept.code}")
                continue
            lexicon.terms[key] = concept.code
    return lexicon


def match_medical_terms(text: str, lexicon: Lexicon) -> List[TermMatch]:
    """Greedy left-to-right longest match over tokens.

    At each position the longest term (up to lexicon.max_tokens) starting
    there wins; on no match the scan advances one token. Matches never
    overlap.
    """
    tokens = tokenize(text)
    matches: List[TermMatch] = []
    i = 0
    n = len(tokens)
    while i < n:
        for length in range(min(lexicon.max_tokens, n - i), 0, -1):
            key = tuple(tokens[i:i + length])
            code = lexicon.terms.get(key)
            if code is not None:
                matches.append(TermMatch(start=i, end=i + length, code=code, term=" ".join(key)))
                i += length
                break
        else:
            i += 1
    return matches
