"""Exact top-k vector search: single-vector, chunked multi-vector, and
token-level late interaction.

Search is an exact flat scan (one matrix product per query); at the corpus
sizes this engine targets that is faster to verify and fast enough to serve.
Rows are unit vectors, so cosine reduces to a dot product. A zero query
vector (featureless text) returns an empty ranking instead of arbitrary
ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .embed import ProviderConfig, chunk_text, embed_texts, l2_normalize
from .errors import (
    BadParamError,
    DimMismatchError,
    EmptyIndexError,
    EmptyMatrixError,
)
from .ranking import RankedList, rank_top_k
from .textprep import FieldConfig, doc_text

ZERO_EPS = 1e-12


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0.0 if either vector is all-zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatchError(f"dims differ: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < ZERO_EPS or nv < ZERO_EPS:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


@dataclass
class DenseIndex:
    """One unit (or zero) row per document."""

    matrix: np.ndarray
    doc_ids: list[str]

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def to_json(self) -> dict:
        return {"doc_ids": self.doc_ids, "matrix": self.matrix.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "DenseIndex":
        return cls(
            matrix=np.asarray(doc["matrix"], dtype=np.float64),
            doc_ids=list(doc["doc_ids"]),
        )


def build_dense_index(
    corpus: Corpus, provider: ProviderConfig, cfg: FieldConfig = FieldConfig()
) -> DenseIndex:
    texts = [doc_text(wf, cfg) for wf in corpus]
    vectors = embed_texts(texts, provider)
    dim = vectors[0].shape[0] if vectors else provider.dim
    matrix = np.zeros((len(vectors), dim), dtype=np.float64)
    for i, vec in enumerate(vectors):
        matrix[i] = l2_normalize(vec)
    return DenseIndex(matrix=matrix, doc_ids=corpus.ids())


def dense_search(index: DenseIndex, qvec: np.ndarray, k: int) -> RankedList:
    """Exact top-k by cosine against every document vector."""
    if k < 1:
        raise BadParamError("k must be >= 1")
    if len(index.doc_ids) == 0:
        raise EmptyIndexError("index has no documents")
    qvec = np.asarray(qvec, dtype=np.float64)
    if qvec.shape != (index.dim,):
        raise DimMismatchError(f"query dim {qvec.shape} != index dim {index.dim}")
    if float(np.linalg.norm(qvec)) < ZERO_EPS:
        return []
    scores = index.matrix @ l2_normalize(qvec)
    return rank_top_k(zip(index.doc_ids, scores.tolist()), k)


@dataclass
class MultiVectorIndex:
    """Chunk vectors plus a chunk-to-document ownership map."""

    chunk_matrix: np.ndarray
    chunk_owner: np.ndarray  # document position per chunk row
    doc_ids: list[str]

    @property
    def dim(self) -> int:
        return int(self.chunk_matrix.shape[1])


def build_multivector_index(
    corpus: Corpus,
    provider: ProviderConfig,
    cfg: FieldConfig = FieldConfig(),
    window: int = 128,
    stride: int = 64,
) -> MultiVectorIndex:
    """Chunk each document and embed every chunk; each doc owns >= 1 chunk."""
    chunks: list[str] = []
    owners: list[int] = []
    for pos, wf in enumerate(corpus):
        doc_chunks = chunk_text(doc_text(wf, cfg), window, stride)
        chunks.extend(doc_chunks)
        owners.extend([pos] * len(doc_chunks))
    vectors = embed_texts(chunks, provider)
    dim = vectors[0].shape[0] if vectors else provider.dim
    matrix = np.zeros((len(vectors), dim), dtype=np.float64)
    for i, vec in enumerate(vectors):
        matrix[i] = l2_normalize(vec)
    return MultiVectorIndex(
        chunk_matrix=matrix,
        chunk_owner=np.asarray(owners, dtype=np.int64),
        doc_ids=corpus.ids(),
    )


def multivector_search(index: MultiVectorIndex, qvec: np.ndarray, k: int) -> RankedList:
    """Top-k documents scored by their best-matching chunk."""
    if k < 1:
        raise BadParamError("k must be >= 1")
    if len(index.doc_ids) == 0:
        raise EmptyIndexError("index has no documents")
    qvec = np.asarray(qvec, dtype=np.float64)
    if qvec.shape != (index.dim,):
        raise DimMismatchError(f"query dim {qvec.shape} != index dim {index.dim}")
    if float(np.linalg.norm(qvec)) < ZERO_EPS:
        return []
    chunk_scores = index.chunk_matrix @ l2_normalize(qvec)
    doc_scores = np.full(len(index.doc_ids), -np.inf)
    np.maximum.at(doc_scores, index.chunk_owner, chunk_scores)
    doc_scores[doc_scores == -np.inf] = 0.0
    return rank_top_k(zip(index.doc_ids, doc_scores.tolist()), k)


@dataclass
class TokenMatrixIndex:
    """Per-document matrices of per-token unit vectors."""

    doc_matrices: list[np.ndarray]
    doc_ids: list[str]


def late_interaction_score(
    query_token_vecs: np.ndarray, doc_token_vecs: np.ndarray, pooled: bool = False
) -> float:
    """Token-level relevance between a query and one document.

    ``pooled=False`` sums, over query tokens, the best cosine against any
    document token (bounded by the query token count). ``pooled=True``
    instead compares the renormalized mean vectors (bounded by 1).
    """
    q = np.atleast_2d(np.asarray(query_token_vecs, dtype=np.float64))
    d = np.atleast_2d(np.asarray(doc_token_vecs, dtype=np.float64))
    if q.shape[0] == 0 or d.shape[0] == 0:
        raise EmptyMatrixError("token matrices must be non-empty")
    if q.shape[1] != d.shape[1]:
        raise DimMismatchError(f"dims differ: {q.shape[1]} vs {d.shape[1]}")
    if pooled:
        return cosine(q.mean(axis=0), d.mean(axis=0))
    q_unit = np.array([l2_normalize(row) for row in q])
    d_unit = np.array([l2_normalize(row) for row in d])
    sims = q_unit @ d_unit.T
    return float(sims.max(axis=1).sum())


def token_matrix_search(
    index: TokenMatrixIndex, query_token_vecs: np.ndarray, k: int, pooled: bool = False
) -> RankedList:
    """Rank documents by late-interaction score against the query tokens."""
    if k < 1:
        raise BadParamError("k must be >= 1")
    if len(index.doc_ids) == 0:
        raise EmptyIndexError("index has no documents")
    scores = (
        (doc_id, late_interaction_score(query_token_vecs, matrix, pooled))
        for doc_id, matrix in zip(index.doc_ids, index.doc_matrices)
    )
    return rank_top_k(scores, k)
