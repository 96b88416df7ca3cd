"""Sparse lexical retrievers: TF-IDF cosine, Okapi BM25, and fuzzy matching.

All scoring is plain Python over token dictionaries so every number is
hand-checkable. Ranked output follows the shared ordering rule: descending
score, ties broken by ascending workflow id; zero-scoring documents still
fill top-k slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .corpus import Corpus
from .errors import BadParamError, EmptyCorpusError, EmptyQueryError
from .ranking import RankedList, rank_top_k
from .textprep import FieldConfig, doc_text, normalize, tokenize


def _counts(tokens: list[str]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tok in tokens:
        counts[tok] = counts.get(tok, 0) + 1
    return counts


@dataclass
class TfidfIndex:
    """Smoothed TF-IDF index with L2-normalized document vectors.

    idf_t = ln((1 + N) / (1 + df_t)) + 1; weights are raw tf times idf.
    Documents with no tokens keep a zero vector.
    """

    vocab: dict[str, int]
    idf: list[float]
    doc_vectors: list[dict[int, float]]
    doc_ids: list[str]
    cfg: FieldConfig = field(default_factory=FieldConfig)

    def to_json(self) -> dict:
        return {
            "vocab": self.vocab,
            "idf": self.idf,
            "doc_vectors": [
                {str(t): w for t, w in vec.items()} for vec in self.doc_vectors
            ],
            "doc_ids": self.doc_ids,
            "cfg": [self.cfg.use_title, self.cfg.use_description, self.cfg.use_tools],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TfidfIndex":
        return cls(
            vocab={str(t): int(i) for t, i in doc["vocab"].items()},
            idf=[float(x) for x in doc["idf"]],
            doc_vectors=[
                {int(t): float(w) for t, w in vec.items()} for vec in doc["doc_vectors"]
            ],
            doc_ids=list(doc["doc_ids"]),
            cfg=FieldConfig(*doc["cfg"]),
        )


def build_tfidf(corpus: Corpus, cfg: FieldConfig = FieldConfig()) -> TfidfIndex:
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot index an empty corpus")
    doc_tokens = [tokenize(doc_text(wf, cfg)) for wf in corpus]
    vocab: dict[str, int] = {}
    df: dict[str, int] = {}
    for tokens in doc_tokens:
        for term in set(tokens):
            if term not in vocab:
                vocab[term] = len(vocab)
            df[term] = df.get(term, 0) + 1
    n_docs = len(corpus)
    idf = [0.0] * len(vocab)
    for term, term_id in vocab.items():
        idf[term_id] = math.log((1 + n_docs) / (1 + df[term])) + 1.0
    doc_vectors = []
    for tokens in doc_tokens:
        vec = {
            vocab[term]: count * idf[vocab[term]]
            for term, count in _counts(tokens).items()
        }
        doc_vectors.append(_l2_normalize(vec))
    return TfidfIndex(
        vocab=vocab, idf=idf, doc_vectors=doc_vectors, doc_ids=corpus.ids(), cfg=cfg
    )


def _l2_normalize(vec: dict[int, float]) -> dict[int, float]:
    norm = math.sqrt(sum(w * w for w in vec.values()))
    if norm == 0.0:
        return {}
    return {t: w / norm for t, w in vec.items()}


def tfidf_query_vector(index: TfidfIndex, query: str) -> dict[int, float]:
    """Embed a query with the index's weighting; unknown terms are dropped."""
    known = [tok for tok in tokenize(query) if tok in index.vocab]
    vec = {
        index.vocab[term]: count * index.idf[index.vocab[term]]
        for term, count in _counts(known).items()
    }
    return _l2_normalize(vec)


def tfidf_score(index: TfidfIndex, query_vec: dict[int, float], doc_id: str) -> float:
    """Cosine between a prepared query vector and one document."""
    doc_vec = index.doc_vectors[index.doc_ids.index(doc_id)]
    return _dot(query_vec, doc_vec)


def _dot(a: dict[int, float], b: dict[int, float]) -> float:
    if len(b) < len(a):
        a, b = b, a
    return sum(w * b.get(t, 0.0) for t, w in a.items())


def tfidf_search(
    index: TfidfIndex, query: str, k: int, on_empty: str = "zeros"
) -> RankedList:
    """Top-k documents by TF-IDF cosine.

    ``on_empty`` controls what happens when no query token survives:
    "zeros" (default) ranks every document with score 0, "raise" raises
    EmptyQueryError.
    """
    if k < 1:
        raise BadParamError("k must be >= 1")
    qvec = tfidf_query_vector(index, query)
    if not qvec and on_empty == "raise":
        raise EmptyQueryError("query has no tokens known to the index")
    scores = [0.0] * len(index.doc_ids)
    for pos, doc_vec in enumerate(index.doc_vectors):
        scores[pos] = _dot(qvec, doc_vec)
    return rank_top_k(zip(index.doc_ids, scores), k)


@dataclass
class Bm25Index:
    """Okapi BM25 statistics with the +1-smoothed idf.

    idf_t = ln(1 + (N - df_t + 0.5) / (df_t + 0.5)).
    """

    df: dict[str, int]
    doc_term_counts: list[dict[str, int]]
    doc_lengths: list[int]
    avgdl: float
    k1: float
    b: float
    doc_ids: list[str]
    cfg: FieldConfig = field(default_factory=FieldConfig)

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def idf(self, term: str) -> float:
        df_t = self.df.get(term, 0)
        return math.log(1.0 + (self.n_docs - df_t + 0.5) / (df_t + 0.5))

    def to_json(self) -> dict:
        return {
            "df": self.df,
            "doc_term_counts": self.doc_term_counts,
            "doc_lengths": self.doc_lengths,
            "avgdl": self.avgdl,
            "k1": self.k1,
            "b": self.b,
            "doc_ids": self.doc_ids,
            "cfg": [self.cfg.use_title, self.cfg.use_description, self.cfg.use_tools],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Bm25Index":
        return cls(
            df={str(t): int(v) for t, v in doc["df"].items()},
            doc_term_counts=[
                {str(t): int(v) for t, v in counts.items()}
                for counts in doc["doc_term_counts"]
            ],
            doc_lengths=[int(x) for x in doc["doc_lengths"]],
            avgdl=float(doc["avgdl"]),
            k1=float(doc["k1"]),
            b=float(doc["b"]),
            doc_ids=list(doc["doc_ids"]),
            cfg=FieldConfig(*doc["cfg"]),
        )


def build_bm25(
    corpus: Corpus,
    cfg: FieldConfig = FieldConfig(),
    k1: float = 1.5,
    b: float = 0.75,
) -> Bm25Index:
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot index an empty corpus")
    if k1 <= 0:
        raise BadParamError("k1 must be > 0")
    if not 0.0 <= b <= 1.0:
        raise BadParamError("b must be in [0, 1]")
    doc_tokens = [tokenize(doc_text(wf, cfg)) for wf in corpus]
    df: dict[str, int] = {}
    for tokens in doc_tokens:
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1
    doc_lengths = [len(tokens) for tokens in doc_tokens]
    avgdl = sum(doc_lengths) / len(doc_lengths)
    return Bm25Index(
        df=df,
        doc_term_counts=[_counts(tokens) for tokens in doc_tokens],
        doc_lengths=doc_lengths,
        avgdl=avgdl,
        k1=k1,
        b=b,
        doc_ids=corpus.ids(),
        cfg=cfg,
    )


def bm25_search(
    index: Bm25Index, query: str, k: int, on_empty: str = "zeros"
) -> RankedList:
    """Top-k documents by BM25; each unique query term contributes once."""
    if k < 1:
        raise BadParamError("k must be >= 1")
    terms = set(tokenize(query)) & set(index.df)
    if not terms and on_empty == "raise":
        raise EmptyQueryError("query has no tokens known to the index")
    scores = [0.0] * index.n_docs
    for term in terms:
        idf_t = index.idf(term)
        for pos in range(index.n_docs):
            tf = index.doc_term_counts[pos].get(term, 0)
            if tf == 0:
                continue
            length_norm = (
                index.doc_lengths[pos] / index.avgdl if index.avgdl > 0 else 0.0
            )
            denom = tf + index.k1 * (1.0 - index.b + index.b * length_norm)
            scores[pos] += idf_t * tf * (index.k1 + 1.0) / denom
    return rank_top_k(zip(index.doc_ids, scores), k)


def indel_distance(a: str, b: str) -> int:
    """Edit distance with insertions and deletions only (no substitutions)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ch_a in enumerate(a, start=1):
        row = [i]
        for j, ch_b in enumerate(b, start=1):
            if ch_a == ch_b:
                row.append(prev[j - 1])
            else:
                row.append(min(row[-1], prev[j]) + 1)
        prev = row
    return prev[-1]


def _indel_ratio(x: str, y: str) -> float:
    total = len(x) + len(y)
    if total == 0:
        return 100.0
    return 100.0 * (total - indel_distance(x, y)) / total


def token_set_ratio(a: str, b: str) -> float:
    """Similarity in [0, 100] that ignores token order and duplication.

    Both sides are normalized into sorted unique token sets; the score is the
    best indel ratio among intersection/remainder string combinations. Two
    empty token sets score 100; one empty side scores 0.
    """
    set_a = set(normalize(a).split()) - {""}
    set_b = set(normalize(b).split()) - {""}
    if not set_a and not set_b:
        return 100.0
    if not set_a or not set_b:
        return 0.0
    inter = " ".join(sorted(set_a & set_b))
    rest_a = " ".join(sorted(set_a - set_b))
    rest_b = " ".join(sorted(set_b - set_a))
    s_1 = " ".join(part for part in (inter, rest_a) if part)
    s_2 = " ".join(part for part in (inter, rest_b) if part)
    return max(
        _indel_ratio(inter, s_1), _indel_ratio(inter, s_2), _indel_ratio(s_1, s_2)
    )


def fuzzy_search(
    corpus: Corpus, cfg: FieldConfig, query: str, k: int
) -> RankedList:
    """Top-k documents by token_set_ratio against their composed text."""
    if k < 1:
        raise BadParamError("k must be >= 1")
    scores = ((wf.id, token_set_ratio(query, doc_text(wf, cfg))) for wf in corpus)
    return rank_top_k(scores, k)
