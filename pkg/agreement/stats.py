"""Cohen's kappa, micro-F1 and confusion tables over aligned label vectors."""
import math
from collections import Counter
from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import cohen_kappa_score, f1_score
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from core.errors import AgreementError, AlignmentError

from .models import LABEL_ORDER


def align(a: Mapping[Hashable, str], b: Mapping[Hashable, str]) -> Tuple[List[Hashable], List[str], List[str]]:
    """Label vectors of a and b over their common, sorted key set.

    Raises AlignmentError listing orphans when the key sets differ.
    """
    only_a = sorted(set(a) - set(b))
    only_b = sorted(set(b) - set(a))
    if only_a or only_b:
        raise AlignmentError(
            f"annotation keys differ: {len(only_a)} only in a, {len(only_b)} only in b",
            only_a=only_a, only_b=only_b,
        )
    keys = sorted(a)
    return keys, [a[k] for k in keys], [b[k] for k in keys]


def label_space(*vectors: Sequence[str]) -> List[str]:
    """Three-way labels in canonical order, then any other labels sorted."""
    present = set().union(*(set(v) for v in vectors))
    known = [label for label in LABEL_ORDER if label in present]
    return known + sorted(present - set(LABEL_ORDER))


def check_lengths(a: Sequence[str], b: Sequence[str]) -> None:
    if len(a) != len(b):
        raise AlignmentError(f"label vectors differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise AgreementError("agreement needs at least one item")


def chance_agreement(a: Sequence[str], b: Sequence[str]) -> float:
    """p_e from the product of marginals."""
    n = len(a)
    ca, cb = Counter(a), Counter(b)
    return sum(ca[label] * cb[label] for label in ca) / (n * n)


def cohens_kappa(a: Sequence[str], b: Sequence[str]) -> Optional[float]:
    """(p_o - p_e) / (1 - p_e); None when p_e = 1 (a single shared class)."""
    check_lengths(a, b)
    if math.isclose(chance_agreement(a, b), 1.0, rel_tol=0.0, abs_tol=1e-15):
        return None
    return float(cohen_kappa_score(list(a), list(b)))


def accuracy(a: Sequence[str], b: Sequence[str]) -> float:
    check_lengths(a, b)
    return sum(1 for x, y in zip(a, b) if x == y) / len(a)


def micro_f1(a: Sequence[str], reference: Sequence[str]) -> float:
    """Micro-averaged F1 of a against reference.

    For single-label items this equals exact-match accuracy; both are
    computed and a mismatch raises AgreementError.
    """
    check_lengths(a, reference)
    labels = label_space(a, reference)
    value = float(f1_score(list(reference), list(a), labels=labels, average="micro"))
    exact = accuracy(a, reference)
    if abs(value - exact) > 1e-12:
        raise AgreementError(f"micro-F1 {value} disagrees with accuracy {exact}")
    return value


def confusion_matrix(a: Sequence[str], b: Sequence[str], labels: Optional[List[str]] = None) -> List[List[int]]:
    """Rows are a's labels, columns b's, in `labels` order."""
    check_lengths(a, b)
    labels = labels or label_space(a, b)
    matrix = sk_confusion_matrix(list(a), list(b), labels=labels)
    return matrix.astype(int).tolist()


def label_counts(labels: Sequence[str]) -> Dict[str, int]:
    counts = Counter(labels)
    return {label: counts[label] for label in label_space(labels)}


def kappa_from_counts(counts: np.ndarray) -> np.ndarray:
    """Kappa of each K x K confusion table in a (..., K, K) array; NaN where p_e = 1."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=(-2, -1))
    observed = np.trace(counts, axis1=-2, axis2=-1) / n
    expected = (counts.sum(axis=-1) * counts.sum(axis=-2)).sum(axis=-1) / (n * n)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = (observed - expected) / (1.0 - expected)
    return np.where(np.isclose(expected, 1.0, rtol=0.0, atol=1e-15), np.nan, kappa)
