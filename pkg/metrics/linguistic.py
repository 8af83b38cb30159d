"""Per-conversation linguistic and behavioral measures over patient turns."""
import logging
from statistics import fmean
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import PortError
from ontology import Lexicon, cosine, match_medical_terms, tokenize

from .models import PairSimilarity, TurnScore

logger = logging.getLogger("patsim.metrics")


def response_length(turns: Sequence[str]) -> Optional[float]:
    """Mean words per turn."""
    if not turns:
        return None
    return fmean(len(tokenize(t)) for t in turns)


def medical_term_count(turns: Sequence[str], lexicon: Lexicon) -> Optional[float]:
    """Mean lexicon matches per turn."""
    if not turns:
        return None
    return fmean(len(match_medical_terms(t, lexicon)) for t in turns)


def turn_mean_score(turns: Sequence[str], classifier) -> TurnScore:
    """Mean classifier probability over turns.

    One failing turn marks the result incomplete and withholds the mean.
    """
    scores: List[float] = []
    failed = 0
    for text in turns:
        try:
            scores.append(float(classifier.score(text)))
        except PortError as e:
            failed += 1
            logger.warning(f"[Metrics] {getattr(classifier, 'label', 'classifier')} failed on a turn: {e}")
    if failed or not scores:
        return TurnScore(value=None, scored=len(scores), failed=failed)
    return TurnScore(value=fmean(scores), scored=len(scores), failed=0)


def on_topic_similarity(pairs: Sequence[Tuple[str, str]], embedder) -> PairSimilarity:
    """Mean cosine between each aid question and the patient's answer.

    Pairs with a zero-norm embedding on either side are skipped and counted.
    """
    if not pairs:
        return PairSimilarity(value=None, pairs=0, skipped=0)
    texts = [t for pair in pairs for t in pair]
    vectors = np.asarray(embedder.embed(texts), dtype=float)
    values: List[float] = []
    skipped = 0
    for i in range(len(pairs)):
        value = cosine(vectors[2 * i], vectors[2 * i + 1])
        if value is None:
            skipped += 1
            continue
        values.append(value)
    if skipped:
        logger.debug(f"[Metrics] on-topic similarity skipped {skipped} zero-norm pairs")
    return PairSimilarity(value=fmean(values) if values else None, pairs=len(values), skipped=skipped)


def mean_or_none(values: Iterable[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return fmean(present) if present else None
