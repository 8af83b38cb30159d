"""Depression and toxicity classifier ports.

The keyword classifiers are deterministic stand-ins for pretrained models:
    score = sigmoid(slope * hits / tokens + intercept)
where hits counts tokens found in the keyword list.
"""
import logging
import math
import os
import threading
from typing import FrozenSet, Optional

import requests

from config import Defaults
from core.errors import PortError
from ontology.lexicon import tokenize

from .base import ClassifierPort
from .registry import PortRegistry

logger = logging.getLogger("patsim.ports")


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


class KeywordClassifier(ClassifierPort):
    """Logistic transform of keyword frequency."""

    name = "keyword"
    description = "Keyword-frequency logistic classifier"
    keywords: FrozenSet[str] = frozenset()
    slope: float = 12.0
    intercept: float = -3.0

    def score(self, text: str) -> float:
        tokens = tokenize(text)
        if not tokens:
            return sigmoid(self.intercept)
        hits = sum(1 for token in tokens if token in self.keywords)
        return sigmoid(self.slope * hits / len(tokens) + self.intercept)


class DepressionKeywordClassifier(KeywordClassifier):
    name = "depression_keyword"
    description = "Depressive-language keyword classifier"
    label = "depression"
    keywords = frozenset({
        "hopeless", "worthless", "sad", "tired", "empty", "numb", "nothing", "pointless",
        "exhausted", "alone", "lonely", "cry", "crying", "guilty", "down", "miserable",
        "heavy", "dark", "worse", "bother", "whatever", "drained", "meh",
    })


class ToxicityKeywordClassifier(KeywordClassifier):
    name = "toxicity_keyword"
    description = "Hostile-language keyword classifier"
    label = "toxicity"
    keywords = frozenset({
        "stupid", "idiot", "useless", "shut", "hate", "ridiculous", "waste", "dumb",
        "pathetic", "damn", "nonsense", "annoying", "incompetent", "clueless", "seriously",
    })


class HttpClassifier(ClassifierPort):
    """Remote classifier: POST {"text": ...} and read {"score": p}.

    Environment Variables:
        PATSIM_CLASSIFIER_API_KEY: bearer token (optional)
    """

    name = "http"
    description = "HTTP classifier endpoint returning a probability"
    requires_auth = False

    def __init__(
        self,
        url: Optional[str] = None,
        label: str = "positive",
        api_key: Optional[str] = None,
        timeout: int = Defaults.REQUEST_TIMEOUT,
    ):
        self.url = url
        self.label = label
        self.api_key = api_key or os.environ.get("PATSIM_CLASSIFIER_API_KEY")
        self.timeout = timeout
        self._thread_local = threading.local()

    def is_configured(self) -> bool:
        return bool(self.url)

    def _get_session(self) -> requests.Session:
        """Get or create a thread-local session."""
        if not hasattr(self._thread_local, "session"):
            session = requests.Session()
            if self.api_key:
                session.headers["Authorization"] = f"Bearer {self.api_key}"
            self._thread_local.session = session
        return self._thread_local.session

    def score(self, text: str) -> float:
        if not self.url:
            raise PortError(f"{self.label} classifier has no endpoint configured")
        try:
            response = self._get_session().post(self.url, json={"text": text}, timeout=self.timeout)
            response.raise_for_status()
            value = float(response.json()["score"])
        except (requests.RequestException, KeyError, TypeError, ValueError) as e:
            raise PortError(f"{self.label} classifier call failed: {e}") from e
        if not 0.0 <= value <= 1.0:
            raise PortError(f"{self.label} classifier returned {value}, outside [0, 1]")
        return value


PortRegistry.register(DepressionKeywordClassifier)
PortRegistry.register(ToxicityKeywordClassifier)
PortRegistry.register(HttpClassifier)
