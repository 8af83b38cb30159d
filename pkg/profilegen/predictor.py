"""Response-probability predictors.

The generator only needs predict(concepts, outcome) -> probability; any
model can be plugged in by subclassing ResponsePredictor.
"""
import math
from abc import ABC, abstractmethod
from typing import Iterable, Tuple

from cohort import CohortStats
from config import Defaults
from core.models import ConceptCode


class ResponsePredictor(ABC):
    """Predicts P(response to outcome | profile concepts)."""

    name: str = "base"

    @abstractmethod
    def predict(self, concepts: Iterable[ConceptCode], outcome: ConceptCode) -> float:
        """Probability in (0, 1)."""


class LogOddsPredictor(ResponsePredictor):
    """Naive log-odds accumulation of per-feature outcome risk ratios.

    logit(p) = logit(smoothed base rate) + sum of smoothed ln RR over the
    profile's features that have enough treated support, clipped.
    """

    name = "log_odds"

    def __init__(self, cohort: CohortStats, clip: Tuple[float, float] = Defaults.PREDICTOR_CLIP):
        self.cohort = cohort
        self.clip = clip

    def predict(self, concepts: Iterable[ConceptCode], outcome: ConceptCode) -> float:
        base = self.cohort.smoothed_base_rate(outcome)
        eligible = self.cohort.predictor_scores(outcome)
        logit = math.log(base / (1.0 - base))
        for code in concepts:
            if code in eligible:
                logit += self.cohort.smoothed_log_rr(code, outcome)
        logit = min(50.0, max(-50.0, logit))
        p = 1.0 / (1.0 + math.exp(-logit))
        lo, hi = self.clip
        return min(hi, max(lo, p))
