"""Benchmark construction: topic clustering, query synthesis, gold sets.

Workflows are grouped with seeded spherical k-means over their embeddings
and each cluster is labeled with class-based TF-IDF keywords. Queries per
topic come either from a generative client or from deterministic templates;
gold sets start from the seed workflows and expand to same-topic workflows
passing a TF-IDF-cosine or keyword-overlap threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .corpus import Corpus, QueryRecord
from .errors import (
    BadParamError,
    ClientError,
    InsufficientKeywordsError,
    SchemaError,
    TooFewPointsError,
    UnknownSeedError,
)
from .lexical import TfidfIndex, build_tfidf, tfidf_query_vector, tfidf_score
from .textprep import FieldConfig, doc_text, tokenize

MAX_KMEANS_ITERS = 100


@dataclass(frozen=True)
class GoldParams:
    """Thresholds controlling gold-set expansion."""

    tfidf_threshold: float = 0.2
    min_keyword_overlap: int = 2

    def __post_init__(self):
        if not 0.0 < self.tfidf_threshold < 1.0:
            raise BadParamError("tfidf_threshold must be in (0, 1)")
        if self.min_keyword_overlap < 1:
            raise BadParamError("min_keyword_overlap must be >= 1")


@dataclass
class ClusterResult:
    assignments: list[int]
    centroids: np.ndarray
    n_iter: int
    objective_history: list[float] = field(default_factory=list)


@dataclass
class TopicModel:
    """Cluster count, per-workflow topic assignment, and topic keywords."""

    k: int
    assignments: dict[str, int]
    keywords: list[list[tuple[str, float]]]
    seed: int = 0

    def members(self, topic: int) -> list[str]:
        return sorted(wid for wid, t in self.assignments.items() if t == topic)

    def topic_label(self, topic: int) -> str:
        return f"topic-{topic:02d}"

    def to_json(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "seed": self.seed,
            "assignments": dict(sorted(self.assignments.items())),
            "keywords": [
                [[term, weight] for term, weight in topic_kw]
                for topic_kw in self.keywords
            ],
        }

    @classmethod
    def from_json(cls, doc: Any) -> "TopicModel":
        if not isinstance(doc, dict) or "assignments" not in doc:
            raise SchemaError("topic file must be an object with assignments")
        return cls(
            k=int(doc["k"]),
            seed=int(doc.get("seed", 0)),
            assignments={str(w): int(t) for w, t in doc["assignments"].items()},
            keywords=[
                [(str(term), float(weight)) for term, weight in topic_kw]
                for topic_kw in doc.get("keywords", [])
            ],
        )


def save_topics(model: TopicModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_topics(path: str | Path) -> TopicModel:
    return TopicModel.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def cluster_topics(
    vectors: Sequence[np.ndarray] | np.ndarray, k: int, seed: int = 0
) -> ClusterResult:
    """Seeded spherical k-means over unit vectors.

    Greedy k-means++ initialization, assign-to-max-cosine iterations with
    renormalized mean centroids, empty clusters re-seeded with the point
    farthest from its own centroid. Deterministic given (vectors, k, seed).
    """
    points = np.asarray(vectors, dtype=np.float64)
    if points.ndim != 2:
        raise BadParamError("vectors must form a 2-d array")
    n = points.shape[0]
    if k < 1 or n < k:
        raise TooFewPointsError(f"need at least k={k} vectors, got {n}")

    centroids = _kmeans_plusplus(points, k, np.random.default_rng(seed))
    assignments = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, MAX_KMEANS_ITERS + 1):
        sims = points @ centroids.T
        new_assignments = np.argmax(sims, axis=1)
        centroids, new_assignments = _reseed_empty_clusters(
            points, centroids, new_assignments, k
        )
        own_sim = np.einsum("ij,ij->i", points, centroids[new_assignments])
        history.append(float(own_sim.mean()))
        converged = bool(np.array_equal(new_assignments, assignments))
        assignments = new_assignments
        centroids = _update_centroids(points, assignments, centroids, k)
        if converged:
            break
    return ClusterResult(
        assignments=assignments.tolist(),
        centroids=centroids,
        n_iter=n_iter,
        objective_history=history,
    )


def _kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    while len(chosen) < k:
        sims = points @ points[chosen].T
        dist = 1.0 - sims.max(axis=1)
        dist = np.clip(dist, 0.0, None)
        dist[chosen] = 0.0
        total = float(dist.sum())
        if total <= 0.0:
            # all remaining points coincide with a centre: first unused index
            unused = [i for i in range(n) if i not in set(chosen)]
            chosen.append(unused[0])
            continue
        probs = dist**2
        probs /= probs.sum()
        chosen.append(int(rng.choice(n, p=probs)))
    return points[chosen].copy()


def _update_centroids(
    points: np.ndarray, assignments: np.ndarray, previous: np.ndarray, k: int
) -> np.ndarray:
    centroids = previous.copy()
    for c in range(k):
        members = points[assignments == c]
        if members.shape[0] == 0:
            continue
        mean = members.mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm > 1e-12:
            centroids[c] = mean / norm
    return centroids


def _reseed_empty_clusters(
    points: np.ndarray, centroids: np.ndarray, assignments: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Re-seed each empty cluster's centroid with the point farthest from
    its own centroid, and move that point over. Keeps the mean-cosine
    objective from decreasing (the moved point scores exactly 1)."""
    assignments = assignments.copy()
    centroids = centroids.copy()
    for c in range(k):
        if np.any(assignments == c):
            continue
        own_sim = np.einsum("ij,ij->i", points, centroids[assignments])
        # steal only from clusters that keep at least two members
        counts = np.bincount(assignments, minlength=k)
        candidates = np.where(counts[assignments] > 1)[0]
        if candidates.size == 0:
            candidates = np.arange(points.shape[0])
        farthest = int(candidates[int(np.argmin(own_sim[candidates]))])
        centroids[c] = points[farthest]
        assignments[farthest] = c
    return centroids, assignments


def ctfidf_keywords(
    corpus: Corpus,
    assignments: dict[str, int],
    top_n: int = 10,
    cfg: FieldConfig = FieldConfig(),
) -> list[list[tuple[str, float]]]:
    """Class-based TF-IDF keywords per topic.

    Each topic's member texts are concatenated into one class document;
    term weight is tf_class * ln(1 + A / f_term) with A the average token
    count per class and f_term the term's total count over all classes.
    Ties order alphabetically.
    """
    if not assignments:
        return []
    k = max(assignments.values()) + 1
    class_counts: list[dict[str, int]] = [{} for _ in range(k)]
    total_counts: dict[str, int] = {}
    total_tokens = 0
    for wf in corpus:
        topic = assignments.get(wf.id)
        if topic is None:
            continue
        for token in tokenize(doc_text(wf, cfg)):
            class_counts[topic][token] = class_counts[topic].get(token, 0) + 1
            total_counts[token] = total_counts.get(token, 0) + 1
            total_tokens += 1
    avg_class_tokens = total_tokens / k if k else 0.0
    keywords: list[list[tuple[str, float]]] = []
    for counts in class_counts:
        weighted = [
            (term, tf * float(np.log(1.0 + avg_class_tokens / total_counts[term])))
            for term, tf in counts.items()
        ]
        weighted.sort(key=lambda pair: (-pair[1], pair[0]))
        keywords.append(weighted[:top_n])
    return keywords


QUERY_TEMPLATES = (
    "how do i {kw1} {kw2} in galaxy",
    "workflow for {kw1} analysis",
    "{kw1} {kw2} pipeline tutorial",
    "best way to run {kw1} on my data",
    "galaxy tool for {kw1} and {kw2}",
    "steps to analyze {kw2} with {kw1}",
)


def generate_queries(
    topic_keywords: Sequence[str],
    example_workflows: Sequence[tuple[str, str]],
    n: int,
    mode: str = "template",
    client=None,
    max_attempts: int = 3,
) -> list[str]:
    """Produce exactly ``n`` search queries for one topic.

    Template mode instantiates rotating patterns over the top keywords and
    is fully deterministic. LLM mode prompts the client with the keywords
    and up to three example workflows, asking for one query per line, and
    re-prompts until ``n`` distinct queries are collected.
    """
    if n < 1:
        raise BadParamError("n must be >= 1")
    if mode == "template":
        return _template_queries(list(topic_keywords), n)
    if mode != "llm":
        raise BadParamError(f"unknown query generation mode {mode!r}")
    if client is None:
        raise BadParamError("llm mode needs a client")
    return _llm_queries(list(topic_keywords), list(example_workflows)[:3], n, client, max_attempts)


def _template_queries(keywords: list[str], n: int) -> list[str]:
    if len(keywords) < 2:
        raise InsufficientKeywordsError("template mode needs at least 2 keywords")
    queries: list[str] = []
    seen: set[str] = set()
    i = 0
    while len(queries) < n:
        kw1 = keywords[i % len(keywords)]
        kw2 = keywords[(i + 1) % len(keywords)]
        text = QUERY_TEMPLATES[i % len(QUERY_TEMPLATES)].format(kw1=kw1, kw2=kw2)
        if text in seen:
            # combination space exhausted: disambiguate explicitly
            text = f"{text} {i}"
        if text not in seen:
            seen.add(text)
            queries.append(text)
        i += 1
    return queries


_LINE_MARKER = __import__("re").compile(r"^\s*(?:\d+[.)]\s*|[-*]\s*)")


def _llm_queries(
    keywords: list[str],
    examples: list[tuple[str, str]],
    n: int,
    client,
    max_attempts: int,
) -> list[str]:
    collected: list[str] = []
    seen: set[str] = set()
    last_error: Exception | None = None
    for _ in range(max_attempts):
        missing = n - len(collected)
        prompt = _query_prompt(keywords, examples, missing)
        try:
            response = client.complete(prompt)
        except Exception as exc:
            last_error = exc
            continue
        for raw_line in response.splitlines():
            line = _LINE_MARKER.sub("", raw_line).strip()
            if line and line not in seen:
                seen.add(line)
                collected.append(line)
            if len(collected) == n:
                return collected
    if len(collected) >= n:
        return collected[:n]
    raise ClientError(
        f"query generation returned {len(collected)}/{n} queries"
        + (f" (last error: {last_error})" if last_error else "")
    )


def _query_prompt(keywords: list[str], examples: list[tuple[str, str]], n: int) -> str:
    lines = [
        "You write realistic search queries that a scientist might type to find "
        "an analysis workflow.",
        "",
        f"Topic keywords: {', '.join(keywords[:10])}",
    ]
    if examples:
        lines.append("Example workflows:")
        for title, description in examples:
            lines.append(f"- {title}: {description[:200]}")
    lines += [
        "",
        f"Output {n} concise search queries, one per line, with no numbering "
        "and no extra text.",
    ]
    return "\n".join(lines)


def build_ground_truth(
    query: str,
    seed_ids: set[str],
    topic_member_ids: set[str],
    corpus: Corpus,
    params: GoldParams = GoldParams(),
    tfidf_index: TfidfIndex | None = None,
    cfg: FieldConfig = FieldConfig(),
) -> set[str]:
    """Seed ids plus same-topic workflows similar enough to the query.

    A topic member joins the gold set when its TF-IDF cosine against the
    query reaches the threshold or it shares at least ``min_keyword_overlap``
    tokens with the query. Seeds must exist in the corpus.
    """
    for seed_id in seed_ids:
        if seed_id not in corpus:
            raise UnknownSeedError(f"seed workflow {seed_id!r} not in corpus")
    if tfidf_index is None:
        tfidf_index = build_tfidf(corpus, cfg)
    query_vec = tfidf_query_vector(tfidf_index, query)
    query_tokens = set(tokenize(query))
    gold = set(seed_ids)
    for member_id in topic_member_ids:
        if member_id in gold or member_id not in corpus:
            continue
        text = doc_text(corpus.get(member_id), cfg)
        overlap = len(query_tokens & set(tokenize(text)))
        if overlap >= params.min_keyword_overlap:
            gold.add(member_id)
            continue
        if tfidf_score(tfidf_index, query_vec, member_id) >= params.tfidf_threshold:
            gold.add(member_id)
    return gold


def build_topic_model(
    corpus: Corpus,
    vectors: Sequence[np.ndarray] | np.ndarray,
    k: int,
    seed: int = 0,
    top_n_keywords: int = 10,
    cfg: FieldConfig = FieldConfig(),
) -> TopicModel:
    """Cluster corpus embeddings and label each cluster with keywords."""
    result = cluster_topics(vectors, k, seed)
    assignments = {wf.id: result.assignments[pos] for pos, wf in enumerate(corpus)}
    keywords = ctfidf_keywords(corpus, assignments, top_n_keywords, cfg)
    return TopicModel(k=k, assignments=assignments, keywords=keywords, seed=seed)


def generate_benchmark(
    corpus: Corpus,
    topics: TopicModel,
    n_per_topic: int,
    mode: str = "template",
    client=None,
    params: GoldParams = GoldParams(),
    cfg: FieldConfig = FieldConfig(),
    expand_gold: bool = True,
    model_name: str = "",
) -> list[QueryRecord]:
    """Queries for every topic, each with seeds and (optionally) gold sets."""
    tfidf_index = build_tfidf(corpus, cfg) if expand_gold else None
    records: list[QueryRecord] = []
    for topic in range(topics.k):
        member_ids = topics.members(topic)
        if not member_ids:
            continue
        keywords = [term for term, _ in topics.keywords[topic]] if topic < len(topics.keywords) else []
        examples = [
            (corpus.get(wid).title, corpus.get(wid).description)
            for wid in member_ids[:3]
        ]
        seed_ids = set(member_ids[:3])
        texts = generate_queries(keywords, examples, n_per_topic, mode, client)
        for q_index, text in enumerate(texts):
            gold = set(seed_ids)
            if expand_gold:
                gold = build_ground_truth(
                    text, seed_ids, set(member_ids), corpus, params, tfidf_index, cfg
                )
            records.append(
                QueryRecord(
                    query_id=f"t{topic:02d}-q{q_index}",
                    text=text,
                    topic=topics.topic_label(topic),
                    seed_ids=seed_ids,
                    gold_workflow_ids=gold,
                    provenance={
                        "mode": mode,
                        "model": model_name,
                        "seed": topics.seed,
                    },
                )
            )
    return records
