"""Flesch-Kincaid grade level.

    FKGL = 0.39 * words/sentences + 11.8 * syllables/words - 15.59

The heuristic backend is frozen (golden tests pin it):

* words: ontology tokenizer (lowercase, non-word characters stripped)
* syllables: vowel groups [aeiouy]+; a final silent "e" is dropped unless the
  word ends in consonant + "le"; "-es" drops one unless after s/x/z/h/c/g,
  "-ed" drops one unless after t/d; every word has at least one
* sentences: split after runs of . ? ! followed by whitespace or end of
  text, except after a listed abbreviation; text without terminal
  punctuation is one sentence
"""
import re
from statistics import fmean
from typing import Iterable, List, Optional

from ontology.lexicon import tokenize

_VOWEL_GROUP = re.compile(r"[aeiouy]+")
_SENTENCE_END = re.compile(r"[.?!]+(?=\s|$)")
_LETTERS = re.compile(r"[^a-z]")

ABBREVIATIONS = {"dr", "mr", "mrs", "ms", "st", "vs", "etc", "e.g", "i.e", "jr", "sr", "approx", "no"}


def count_syllables(word: str) -> int:
    w = _LETTERS.sub("", word.lower())
    if not w:
        return 1
    count = len(_VOWEL_GROUP.findall(w))
    if count > 1:
        if w.endswith("e") and not (w.endswith("le") and len(w) > 2 and w[-3] not in "aeiouy"):
            count -= 1
        elif w.endswith("es") and len(w) > 3 and w[-3] not in "sxzhcg":
            count -= 1
        elif w.endswith("ed") and len(w) > 3 and w[-3] not in "td":
            count -= 1
    return max(1, count)


def split_sentences(text: str) -> List[str]:
    sentences: List[str] = []
    start = 0
    for match in _SENTENCE_END.finditer(text):
        preceding = text[start:match.start()].split()
        last = preceding[-1].lower().rstrip(".") if preceding else ""
        if match.group() == "." and last in ABBREVIATIONS:
            continue
        sentences.append(text[start:match.end()])
        start = match.end()
    sentences.append(text[start:])
    return [s.strip() for s in sentences if tokenize(s)]


def fkgl_text(text: str) -> Optional[float]:
    """FKGL of one text; None when it has no words."""
    words = tokenize(text)
    if not words:
        return None
    sentences = max(1, len(split_sentences(text)))
    syllables = sum(count_syllables(w) for w in words)
    return 0.39 * len(words) / sentences + 11.8 * syllables / len(words) - 15.59


def textstat_fkgl(text: str) -> Optional[float]:
    if not tokenize(text):
        return None
    import textstat
    return float(textstat.flesch_kincaid_grade(text))


def fkgl(turns: Iterable[str], backend: str = "heuristic") -> Optional[float]:
    """Mean per-turn FKGL over non-empty turns; None when all are empty."""
    score = textstat_fkgl if backend == "textstat" else fkgl_text
    values = [v for v in (score(t) for t in turns) if v is not None]
    return fmean(values) if values else None
