"""Embedding providers.

Two providers share one vector contract (fixed dimension, unit L2 norm, or
all-zero for featureless text): a remote client speaking the standard
embeddings wire format, and a deterministic feature-hashing embedder that
needs no network or model weights, so the whole pipeline runs offline.
"""

from __future__ import annotations

import os
import time
import logging
from dataclasses import dataclass

import numpy as np
import requests

from .errors import (
    AuthError,
    BadDimError,
    BadParamError,
    NetworkError,
    RateLimitedError,
    SchemaError,
)
from .textprep import tokenize

logger = logging.getLogger(__name__)

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
MASK64 = (1 << 64) - 1

DEFAULT_DIM = 256
DEFAULT_WINDOW = 128
DEFAULT_STRIDE = 64


@dataclass(frozen=True)
class ProviderConfig:
    """Embedding provider selection and remote-endpoint settings."""

    kind: str = "hash"  # "hash" or "remote"
    endpoint: str | None = None
    model_name: str | None = None
    api_key: str | None = None
    dim: int = DEFAULT_DIM
    batch_size: int = 64
    max_retries: int = 3
    timeout_s: float = 30.0

    def __post_init__(self):
        if self.kind not in ("hash", "remote"):
            raise BadParamError(f"unknown provider kind {self.kind!r}")
        if self.kind == "remote" and not (self.endpoint and self.model_name):
            raise BadParamError("remote provider needs endpoint and model_name")
        if self.dim < 8:
            raise BadDimError("dim must be >= 8")

    @classmethod
    def from_env(cls, dim: int = DEFAULT_DIM) -> "ProviderConfig":
        """Remote config from EMBED_API_URL/EMBED_API_KEY/EMBED_MODEL, else hash."""
        endpoint = os.environ.get("EMBED_API_URL")
        if endpoint:
            return cls(
                kind="remote",
                endpoint=endpoint,
                model_name=os.environ.get("EMBED_MODEL", "text-embedding-3-small"),
                api_key=os.environ.get("EMBED_API_KEY"),
                dim=dim,
            )
        return cls(kind="hash", dim=dim)


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec
    return vec / norm


def hash_embed(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Deterministic bag-of-features embedding.

    Features are the tokens of ``text`` (weight 1.0) and each token's
    character 3-grams (weight 0.5). Each feature is FNV-1a-hashed to a
    signed bucket; the accumulated vector is L2-normalized. Featureless
    text maps to the zero vector.
    """
    if dim < 8:
        raise BadDimError("dim must be >= 8")
    vec = np.zeros(dim, dtype=np.float64)
    found = False
    for token in tokenize(text):
        _accumulate(vec, token, 1.0, dim)
        found = True
        for i in range(len(token) - 2):
            _accumulate(vec, token[i : i + 3], 0.5, dim)
    if not found:
        return vec
    return l2_normalize(vec)


def _accumulate(vec: np.ndarray, feature: str, weight: float, dim: int) -> None:
    h = fnv1a_64(feature.encode("utf-8"))
    sign = 1.0 if (h >> 63) == 0 else -1.0
    vec[h % dim] += sign * weight


def remote_embed(texts: list[str], cfg: ProviderConfig) -> list[np.ndarray]:
    """Embed texts through the remote endpoint, batching and retrying.

    Requests carry ``{"model": ..., "input": [...]}``; responses are read
    from ``data[i].embedding`` and reassembled in input order. Transient
    failures (connection errors, 429, 5xx) are retried with exponential
    backoff up to ``max_retries``.
    """
    if cfg.kind != "remote":
        raise BadParamError("remote_embed requires a remote provider config")
    out: list[np.ndarray] = []
    for start in range(0, len(texts), cfg.batch_size):
        batch = texts[start : start + cfg.batch_size]
        out.extend(_embed_batch(batch, cfg))
    return out


def _embed_batch(batch: list[str], cfg: ProviderConfig) -> list[np.ndarray]:
    headers = {"Content-Type": "application/json"}
    if cfg.api_key:
        headers["Authorization"] = f"Bearer {cfg.api_key}"
    body = {"model": cfg.model_name, "input": batch}
    last_error: Exception | None = None
    for attempt in range(cfg.max_retries + 1):
        if attempt:
            time.sleep(min(2 ** (attempt - 1) * 0.1, 5.0))
        try:
            resp = requests.post(
                cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout_s
            )
        except requests.RequestException as exc:
            last_error = NetworkError(f"embedding request failed: {exc}")
            continue
        if resp.status_code in (401, 403):
            raise AuthError(f"embedding endpoint returned HTTP {resp.status_code}")
        if resp.status_code == 429:
            last_error = RateLimitedError("embedding endpoint rate limited")
            continue
        if resp.status_code >= 500:
            last_error = NetworkError(f"embedding endpoint HTTP {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise NetworkError(f"embedding endpoint HTTP {resp.status_code}")
        return _parse_embeddings(resp.json(), len(batch))
    assert last_error is not None
    raise last_error


def _parse_embeddings(payload, expected: int) -> list[np.ndarray]:
    if not isinstance(payload, dict) or not isinstance(payload.get("data"), list):
        raise SchemaError('embedding response missing "data" array')
    data = payload["data"]
    if len(data) != expected:
        raise SchemaError(f"expected {expected} embeddings, got {len(data)}")
    slots: list[np.ndarray | None] = [None] * expected
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or "embedding" not in entry:
            raise SchemaError("embedding entry missing vector")
        index = entry.get("index", i)
        if not isinstance(index, int) or not 0 <= index < expected:
            raise SchemaError(f"embedding entry has bad index {index!r}")
        vec = np.asarray(entry["embedding"], dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise SchemaError("embedding vector is not a flat array")
        slots[index] = l2_normalize(vec)
    vectors = [v for v in slots if v is not None]
    if len(vectors) != expected:
        raise SchemaError("duplicate or missing embedding indexes")
    dims = {v.shape[0] for v in vectors}
    if len(dims) > 1:
        raise SchemaError(f"ragged embedding dimensions: {sorted(dims)}")
    return vectors


def embed_texts(texts: list[str], cfg: ProviderConfig) -> list[np.ndarray]:
    """Provider dispatch: hash locally or call the remote endpoint."""
    if cfg.kind == "hash":
        return [hash_embed(text, cfg.dim) for text in texts]
    return remote_embed(texts, cfg)


def chunk_text(
    text: str, window: int = DEFAULT_WINDOW, stride: int = DEFAULT_STRIDE
) -> list[str]:
    """Split text into overlapping token windows, re-joined with spaces.

    A text of at most ``window`` tokens yields exactly one chunk; otherwise
    windows start at every multiple of ``stride`` below the token count and
    the final partial window is kept.
    """
    if stride < 1 or stride > window:
        raise BadParamError("need 1 <= stride <= window")
    tokens = tokenize(text)
    if len(tokens) <= window:
        return [" ".join(tokens)]
    return [
        " ".join(tokens[start : start + window])
        for start in range(0, len(tokens), stride)
    ]
