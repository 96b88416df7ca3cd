"""Second-stage reranking of candidate workflows with a generative scorer.

The stage-1 candidate list is packed into a deterministic prompt asking for
per-candidate relevance scores in JSON; the response is parsed strictly,
then leniently. Whatever the scoring client does (garbage output,
hallucinated ids, timeouts), the output is always a permutation of the
input candidates; the worst case is stage-1 order plus a warning.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field

import requests

from .corpus import Corpus
from .errors import ClientError, TooManyCandidatesError, UnparseableError
from .ranking import RankedList

logger = logging.getLogger(__name__)

DESCRIPTION_LIMIT = 600


@dataclass(frozen=True)
class RerankConfig:
    endpoint: str | None = None
    model_name: str = ""
    api_key: str | None = None
    candidates_k: int = 50
    timeout_s: float = 60.0
    temperature: float = 0.0
    prompt_char_budget: int = 16000
    max_retries: int = 1

    @classmethod
    def from_env(cls) -> "RerankConfig":
        return cls(
            endpoint=os.environ.get("RERANK_API_URL"),
            model_name=os.environ.get("RERANK_MODEL", ""),
            api_key=os.environ.get("RERANK_API_KEY"),
        )

    @property
    def configured(self) -> bool:
        return bool(self.endpoint and self.model_name)


@dataclass
class RerankOutcome:
    """Final ordering plus everything needed to audit how it was produced."""

    list: RankedList
    used_llm: bool
    per_id_scores: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def build_rerank_prompt(
    query: str,
    candidates: list[tuple[str, str, str]],
    max_candidates: int = 50,
) -> str:
    """Deterministic scoring prompt over (id, title, description) triples."""
    if not 1 <= len(candidates) <= max_candidates:
        raise TooManyCandidatesError(
            f"got {len(candidates)} candidates, limit {max_candidates}"
        )
    lines = [
        "You are ranking scientific workflows. Score each workflow's relevance "
        "to the query from 0.0 to 1.0.",
        "",
        f"Query: {query}",
        "",
        "Workflows:",
    ]
    for i, (cand_id, title, description) in enumerate(candidates, start=1):
        desc = description or ""
        if len(desc) > DESCRIPTION_LIMIT:
            desc = desc[:DESCRIPTION_LIMIT] + "…"
        lines.append(f"{i}. [{cand_id}] {title} — {desc}")
    lines += [
        "",
        'Answer ONLY with JSON of the form {"scores":[{"id":"...","score":0.0}]} '
        "covering every workflow id above.",
    ]
    return "\n".join(lines)


def parse_scores(response_text: str, candidate_ids: list[str]) -> dict[str, float]:
    """Recover an id -> score map from a scoring response.

    Tries a strict JSON parse of the "scores" array first, then a lenient
    scan for id/score pairs. Scores are clamped to [0, 1]; ids outside
    ``candidate_ids`` are dropped; the first occurrence of an id wins.
    Raises UnparseableError when nothing can be recovered.
    """
    known = set(candidate_ids)
    scores = _parse_strict(response_text, known)
    if scores is None:
        scores = _parse_lenient(response_text, known)
    if not scores:
        raise UnparseableError("no candidate scores found in response")
    return scores


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


def _parse_strict(text: str, known: set[str]) -> dict[str, float] | None:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        return None
    if not isinstance(doc, dict) or not isinstance(doc.get("scores"), list):
        return None
    out: dict[str, float] = {}
    for entry in doc["scores"]:
        if not isinstance(entry, dict) or "id" not in entry or "score" not in entry:
            continue
        cand_id = str(entry["id"])
        try:
            score = float(entry["score"])
        except (TypeError, ValueError):
            continue
        if cand_id in known and cand_id not in out:
            out[cand_id] = _clamp(score)
    return out


_PAIR_RE = re.compile(
    r'"id"\s*:\s*(?:"(?P<qid>[^"]*)"|(?P<bid>[^,}\s]+))'
    r'[^{}]*?"score"\s*:\s*(?P<score>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)',
    re.DOTALL,
)


def _parse_lenient(text: str, known: set[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for match in _PAIR_RE.finditer(text):
        cand_id = match.group("qid") if match.group("qid") is not None else match.group("bid")
        if cand_id in known and cand_id not in out:
            out[cand_id] = _clamp(float(match.group("score")))
    return out


class HttpChatClient:
    """Minimal chat-completions client used for reranking."""

    def __init__(self, cfg: RerankConfig):
        if not cfg.configured:
            raise ClientError("rerank endpoint/model not configured")
        self.cfg = cfg

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key:
            headers["Authorization"] = f"Bearer {self.cfg.api_key}"
        body = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }
        last_error: Exception | None = None
        for _ in range(self.cfg.max_retries + 1):
            try:
                resp = requests.post(
                    self.cfg.endpoint,
                    json=body,
                    headers=headers,
                    timeout=self.cfg.timeout_s,
                )
            except requests.RequestException as exc:
                last_error = ClientError(f"chat request failed: {exc}")
                continue
            if resp.status_code != 200:
                last_error = ClientError(f"chat endpoint HTTP {resp.status_code}")
                continue
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ClientError(f"malformed chat response: {exc}") from exc
        assert last_error is not None
        raise last_error


def _batch_candidates(
    candidates: list[tuple[str, str, str]], budget: int
) -> list[list[tuple[str, str, str]]]:
    """Split candidates so each prompt stays under the character budget."""
    batches: list[list[tuple[str, str, str]]] = []
    current: list[tuple[str, str, str]] = []
    used = 0
    for cand in candidates:
        entry_len = len(cand[0]) + len(cand[1]) + min(len(cand[2]), DESCRIPTION_LIMIT) + 16
        if current and used + entry_len > budget:
            batches.append(current)
            current, used = [], 0
        current.append(cand)
        used += entry_len
    if current:
        batches.append(current)
    return batches


def rerank(
    query: str,
    stage1: RankedList,
    corpus: Corpus,
    client,
    cfg: RerankConfig = RerankConfig(),
) -> RerankOutcome:
    """Reorder the stage-1 candidates by scores from the client.

    Candidates beyond ``cfg.candidates_k`` are not sent for scoring. Scored
    candidates sort by (score desc, stage-1 score desc, id asc); unscored
    ones follow in their stage-1 order. Any client failure falls back to the
    stage-1 order with a warning; candidates are never lost.
    """
    candidates = stage1[: cfg.candidates_k]
    stage1_ids = [cand_id for cand_id, _ in candidates]
    fallback = RerankOutcome(list=list(candidates), used_llm=False)

    if not candidates:
        return fallback

    triples = []
    for cand_id, _ in candidates:
        if cand_id in corpus:
            wf = corpus.get(cand_id)
            triples.append((cand_id, wf.title, wf.description))
        else:
            triples.append((cand_id, "", ""))

    scores: dict[str, float] = {}
    warnings: list[str] = []
    for batch in _batch_candidates(triples, cfg.prompt_char_budget):
        prompt = build_rerank_prompt(query, batch, max_candidates=cfg.candidates_k)
        try:
            response = client.complete(prompt)
            batch_scores = parse_scores(response, [cand_id for cand_id, _, _ in batch])
        except UnparseableError as exc:
            warnings.append(f"unparseable scorer response: {exc}")
            continue
        except Exception as exc:  # any client failure degrades, never raises
            warnings.append(f"scorer call failed: {exc}")
            continue
        for cand_id, score in batch_scores.items():
            scores.setdefault(cand_id, score)

    if not scores:
        fallback.warnings = warnings or ["no scores recovered; kept stage-1 order"]
        return fallback

    missing = [cand_id for cand_id in stage1_ids if cand_id not in scores]
    if missing:
        warnings.append(f"{len(missing)} candidate(s) not scored; placed last")

    stage1_scores = dict(candidates)
    scored = [c for c in candidates if c[0] in scores]
    scored.sort(key=lambda c: (-scores[c[0]], -stage1_scores[c[0]], c[0]))
    unscored = [c for c in candidates if c[0] not in scores]
    final = [(cand_id, scores.get(cand_id, stage1_scores[cand_id])) for cand_id, _ in scored + unscored]
    return RerankOutcome(
        list=final, used_llm=True, per_id_scores=dict(scores), warnings=warnings
    )
