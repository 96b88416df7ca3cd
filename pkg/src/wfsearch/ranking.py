"""Ranked result lists shared by all retrievers and the reranker.

A ranked list is an ordered ``list[(workflow_id, score)]``: descending by
score, ties broken by ascending workflow id, no duplicate ids.
"""

from __future__ import annotations

from typing import Iterable

RankedList = list[tuple[str, float]]


def rank_top_k(scores: Iterable[tuple[str, float]], k: int) -> RankedList:
    """Sort (id, score) pairs by the ranking rule and keep the top ``k``."""
    ordered = sorted(scores, key=lambda pair: (-pair[1], pair[0]))
    return ordered[: max(k, 0)]


def is_ranked(items: RankedList) -> bool:
    """Check the ordering rule and id uniqueness; used by tests."""
    ids = [wid for wid, _ in items]
    if len(set(ids)) != len(ids):
        return False
    keys = [(-score, wid) for wid, score in items]
    return keys == sorted(keys)
