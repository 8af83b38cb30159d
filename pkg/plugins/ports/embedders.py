"""Text embedding ports.

`hash` is the offline embedder: character trigrams are hashed with MurmurHash3
into a fixed bucket space and projected by a seeded Gaussian matrix. Same
string, same vector, on every platform.
"""
import logging
import os
from typing import List, Optional

import mmh3
import numpy as np

from config import Defaults
from core.errors import PortError

from .base import EmbeddingPort
from .registry import PortRegistry

logger = logging.getLogger("patsim.ports")


def char_ngrams(text: str, n: int = 3) -> List[str]:
    """Word-padded character n-grams of the lowercased text."""
    grams: List[str] = []
    for word in text.lower().split():
        padded = f"#{word}#"
        if len(padded) <= n:
            grams.append(padded)
            continue
        grams.extend(padded[i:i + n] for i in range(len(padded) - n + 1))
    return grams


class HashEmbedder(EmbeddingPort):
    """Deterministic hashed char-trigram embedder.

    Example:
        embedder = HashEmbedder(dimension=64)
        vectors = embedder.embed(["Major depressive disorder", "Dysthymia"])
    """

    name = "hash"
    description = "Offline hashed character-trigram embedder"

    def __init__(
        self,
        dimension: int = Defaults.EMBEDDING_DIM,
        buckets: int = Defaults.HASH_BUCKETS,
        seed: int = Defaults.SEED,
    ):
        self.dimension = dimension
        self.buckets = buckets
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((buckets, dimension)) / np.sqrt(dimension)

    def counts(self, text: str) -> np.ndarray:
        vector = np.zeros(self.buckets)
        for gram in char_ngrams(text):
            vector[mmh3.hash(gram, 0, signed=False) % self.buckets] += 1.0
        return vector

    def embed(self, texts: List[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension))
        counts = np.vstack([self.counts(t) for t in texts])
        projected = counts @ self._projection
        norms = np.linalg.norm(projected, axis=1, keepdims=True)
        return projected / np.where(norms == 0, 1.0, norms)


class OpenAIEmbedder(EmbeddingPort):
    """Embeddings from an OpenAI-compatible endpoint.

    Environment Variables:
        PATSIM_EMBEDDING_BASE_URL, PATSIM_EMBEDDING_API_KEY (falls back to OPENAI_API_KEY)
    """

    name = "openai"
    description = "OpenAI-compatible embeddings endpoint"
    requires_auth = True

    def __init__(
        self,
        model: str = Defaults.EMBEDDING_MODEL,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: int = Defaults.REQUEST_TIMEOUT,
        batch_size: int = 256,
    ):
        self.model = model
        self.base_url = base_url or os.environ.get("PATSIM_EMBEDDING_BASE_URL")
        self.api_key = api_key or os.environ.get("PATSIM_EMBEDDING_API_KEY") or os.environ.get("OPENAI_API_KEY")
        self.timeout = timeout
        self.batch_size = batch_size
        self._client = None

    @property
    def client(self):
        """Lazy-load the OpenAI client."""
        if self._client is None:
            import openai
            self._client = openai.OpenAI(base_url=self.base_url, api_key=self.api_key, timeout=self.timeout)
        return self._client

    def is_configured(self) -> bool:
        return bool(self.api_key)

    def embed(self, texts: List[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension))
        rows: List[List[float]] = []
        try:
            for start in range(0, len(texts), self.batch_size):
                response = self.client.embeddings.create(model=self.model, input=texts[start:start + self.batch_size])
                rows.extend(item.embedding for item in sorted(response.data, key=lambda d: d.index))
        except Exception as e:
            raise PortError(f"embedding request failed: {e}") from e
        matrix = np.asarray(rows, dtype=float)
        self.dimension = matrix.shape[1]
        logger.debug(f"[Embed] {len(texts)} texts -> dim {self.dimension}")
        return matrix


PortRegistry.register(HashEmbedder)
PortRegistry.register(OpenAIEmbedder)
