"""Embedding similarity over concept display names."""
import threading
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from core.models import FEATURE_VOCABULARIES, ConceptCode, Vocabulary

from .graph import Ontology


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Unit-normalize rows; all-zero rows stay zero."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0, 1.0, norms)
    return matrix / safe


class SimilarityIndex:
    """Per-vocabulary cosine index over display-name embeddings.

    Rows are kept in code order, so a stable sort on scores breaks ties by
    code.
    """

    def __init__(self, ontology: Ontology, embedder):
        self.ontology = ontology
        self.embedder = embedder
        self._lock = threading.Lock()
        self._tables: Dict[Vocabulary, Tuple[List[ConceptCode], np.ndarray]] = {}

    def _table(self, vocabulary: Vocabulary) -> Tuple[List[ConceptCode], np.ndarray]:
        table = self._tables.get(vocabulary)
        if table is None:
            codes = self.ontology.codes(vocabulary)
            names = [self.ontology.display_name(c) for c in codes]
            if names:
                matrix = normalize_rows(np.asarray(self.embedder.embed(names), dtype=float))
            else:
                matrix = np.zeros((0, 1))
            table = (codes, matrix)
            with self._lock:
                self._tables.setdefault(vocabulary, table)
                table = self._tables[vocabulary]
        return table

    def vector(self, code: ConceptCode) -> np.ndarray:
        codes, matrix = self._table(code.vocabulary)
        self.ontology.get(code)
        return matrix[codes.index(code)]

    def nearest(self, code: ConceptCode, k: int) -> List[Tuple[ConceptCode, float]]:
        """Top-k same-vocabulary neighbours of code by cosine, code itself excluded."""
        codes, matrix = self._table(code.vocabulary)
        query = self.vector(code)
        scores = matrix @ query
        order = np.argsort(-scores, kind="stable")
        result = []
        for i in order:
            if codes[i] == code:
                continue
            result.append((codes[i], float(scores[i])))
            if len(result) == k:
                break
        return result

    def query(
        self,
        vector: np.ndarray,
        k: int,
        vocabularies: Iterable[Vocabulary] = FEATURE_VOCABULARIES,
    ) -> List[Tuple[ConceptCode, float]]:
        """Top-k concepts across vocabularies for a free-text embedding."""
        norm = np.linalg.norm(vector)
        if norm == 0:
            return []
        vector = vector / norm
        pooled: List[Tuple[ConceptCode, float]] = []
        for vocabulary in vocabularies:
            codes, matrix = self._table(vocabulary)
            if not codes:
                continue
            scores = matrix @ vector
            top = np.argsort(-scores, kind="stable")[:k]
            pooled.extend((codes[i], float(scores[i])) for i in top)
        pooled.sort(key=lambda item: (-item[1], item[0]))
        return pooled[:k]


@lru_cache(maxsize=8)
def similarity_index(ontology: Ontology, embedder) -> SimilarityIndex:
    """Shared index per (ontology, embedder) pair."""
    return SimilarityIndex(ontology, embedder)


def cosine(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    """Cosine similarity; None when either vector has zero norm."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return None
    return float(np.dot(a, b) / (na * nb))
