"""Text encoders behind a provider interface.

Two backends ship here: a deterministic signed-feature-hashing encoder
(offline, dependency-free, bit-reproducible — the default for CI) and a
client for a remote embedding service speaking the ``/embed`` wire
protocol. Both produce 512-dimensional vectors; the learned projection
that follows lives in the model, not here.

Wire protocol (served elsewhere, consumed here):
    POST /embed  {"texts": [str, ...]}
        -> 200 {"model": str, "dim": 512, "vectors": [[512 floats], ...]}
        -> 400 for an empty text list, 413 for more than 256 texts,
           500 {"error": str} otherwise
    GET /health  -> {"status": "ok", "model": str, "dim": 512}
"""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from typing import Optional, Protocol, Sequence

import numpy as np
import requests

from ._text import char_trigrams, tokenize

EMBED_DIM = 512
MAX_BATCH = 256


class TransportFailure(Exception):
    """Network-level failure talking to an embedding service; retryable."""


class ProtocolViolation(Exception):
    """The service answered, but outside the wire contract."""


class ServerRejection(Exception):
    """The service refused the request with an error status."""

    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"embedding server rejected request: {status} {body[:200]}")


class EmbeddingProvider(Protocol):
    """Deterministic text encoder: same text, same vector, order preserved."""

    descriptor: str

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def _hash_slot(token: str) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "big")
    index = value % EMBED_DIM
    sign = 1.0 if (value >> 16) & 1 else -1.0
    return index, sign


def hash_embed(text: str) -> np.ndarray:
    """Signed feature hashing over word tokens and character trigrams,
    scaled to unit Euclidean norm. Empty text stays the zero vector."""
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    for token in tokenize(text):
        index, sign = _hash_slot(token)
        vec[index] += sign
        for gram in char_trigrams(token):
            index, sign = _hash_slot("3g:" + gram)
            vec[index] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


class HashProvider:
    """The offline backbone: pure function of the text, no I/O."""

    descriptor = "hash:blake2b-512"

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [hash_embed(t) for t in texts]


def _validate_vectors(payload: dict, expected: int) -> list[np.ndarray]:
    if payload.get("dim") != EMBED_DIM:
        raise ProtocolViolation(f"server advertises dim {payload.get('dim')}, need {EMBED_DIM}")
    vectors = payload.get("vectors")
    if not isinstance(vectors, list) or len(vectors) != expected:
        got = len(vectors) if isinstance(vectors, list) else "none"
        raise ProtocolViolation(f"expected {expected} vectors, got {got}")
    out = []
    for i, values in enumerate(vectors):
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (EMBED_DIM,):
            raise ProtocolViolation(f"vector {i} has shape {arr.shape}, need ({EMBED_DIM},)")
        if not np.all(np.isfinite(arr)):
            raise ProtocolViolation(f"vector {i} contains non-finite entries")
        out.append(arr)
    return out


def remote_embed(
    texts: Sequence[str],
    endpoint: str,
    timeout: float = 30.0,
    session: Optional[requests.Session] = None,
) -> list[np.ndarray]:
    """Embed texts via the wire protocol, transparently splitting inputs
    larger than the 256-text request cap and preserving order."""
    if not texts:
        return []
    http = session or requests
    results: list[np.ndarray] = []
    for start in range(0, len(texts), MAX_BATCH):
        chunk = list(texts[start : start + MAX_BATCH])
        try:
            response = http.post(
                endpoint.rstrip("/") + "/embed", json={"texts": chunk}, timeout=timeout
            )
        except requests.RequestException as exc:
            raise TransportFailure(f"embed request failed: {exc}") from exc
        if response.status_code != 200:
            raise ServerRejection(response.status_code, response.text)
        try:
            payload = response.json()
        except ValueError as exc:
            raise ProtocolViolation(f"response is not JSON: {exc}") from exc
        results.extend(_validate_vectors(payload, len(chunk)))
    return results


class RemoteProvider:
    """Client-side provider for a running embedding service.

    The service's advertised dimension is checked once at registration;
    anything but 512 is rejected because the trained projection depends
    on it.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        normalize: bool = False,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.normalize = normalize
        self._session = session
        model = self._probe_health()
        self.descriptor = f"remote:{model}@{self.endpoint}"

    def _probe_health(self) -> str:
        http = self._session or requests
        try:
            response = http.get(self.endpoint + "/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportFailure(f"health probe failed: {exc}") from exc
        if response.status_code != 200:
            raise ServerRejection(response.status_code, response.text)
        payload = response.json()
        if payload.get("dim") != EMBED_DIM:
            raise ProtocolViolation(
                f"provider declares dim {payload.get('dim')}; only {EMBED_DIM} accepted"
            )
        return str(payload.get("model", "unknown"))

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        vectors = remote_embed(
            texts, self.endpoint, timeout=self.timeout, session=self._session
        )
        if self.normalize:
            vectors = [
                v / n if (n := float(np.linalg.norm(v))) > 0 else v for v in vectors
            ]
        return vectors


class EmbeddingCache:
    """Bounded LRU cache in front of a provider, keyed by
    (provider descriptor, exact text). Transparent: cached results equal
    what the provider would return; misses go to the provider in one
    order-preserving batch."""

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ValueError("cache capacity must be positive")
        self.capacity = capacity
        self._store: OrderedDict[tuple[str, str], np.ndarray] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._store)

    def embed(self, provider: EmbeddingProvider, texts: Sequence[str]) -> list[np.ndarray]:
        results: list[Optional[np.ndarray]] = [None] * len(texts)
        miss_indices: list[int] = []
        miss_texts: list[str] = []
        pending: set[str] = set()
        with self._lock:
            for i, text in enumerate(texts):
                key = (provider.descriptor, text)
                if key in self._store:
                    self._store.move_to_end(key)
                    results[i] = self._store[key]
                else:
                    miss_indices.append(i)
                    if text not in pending:
                        pending.add(text)
                        miss_texts.append(text)
        if miss_texts:
            fresh = provider.embed_batch(miss_texts)
            if len(fresh) != len(miss_texts):
                raise ProtocolViolation(
                    f"provider returned {len(fresh)} vectors for {len(miss_texts)} texts"
                )
            by_text = dict(zip(miss_texts, fresh))
            with self._lock:
                for text in miss_texts:
                    key = (provider.descriptor, text)
                    self._store[key] = by_text[text]
                    self._store.move_to_end(key)
                while len(self._store) > self.capacity:
                    self._store.popitem(last=False)
            for i in miss_indices:
                results[i] = by_text[texts[i]]
        assert all(r is not None for r in results)
        return results  # type: ignore[return-value]
