"""Text normalization, tokenization, and document-text composition.

Every retriever goes through these functions, so the scheme is deliberately
simple and bit-reproducible: no stop words, no stemming, minimum token
length 2.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

from .errors import BadParamError

MIN_TOKEN_LEN = 2


@dataclass(frozen=True)
class FieldConfig:
    """Which workflow fields contribute to the searchable text."""

    use_title: bool = True
    use_description: bool = True
    use_tools: bool = True

    def __post_init__(self):
        if not (self.use_title or self.use_description or self.use_tools):
            raise BadParamError("at least one field must be enabled")


def normalize(text: str) -> str:
    """Compatibility-normalize, lowercase, and strip punctuation.

    Every non-alphanumeric character becomes a single space and runs of
    spaces collapse, so the output is space-separated alphanumeric words.
    Idempotent and total.
    """
    folded = unicodedata.normalize("NFKC", text).lower()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in folded)
    return " ".join(cleaned.split())


def tokenize(text: str) -> list[str]:
    """Normalize then split; tokens shorter than 2 characters are dropped.

    Duplicates and order are preserved.
    """
    return [tok for tok in normalize(text).split() if len(tok) >= MIN_TOKEN_LEN]


def doc_text(workflow, cfg: FieldConfig = FieldConfig()) -> str:
    """Compose the searchable text of a workflow from its enabled fields.

    Enabled fields are joined with ". " in the fixed order title,
    description, tools; empty fields are kept so the composition stays
    deterministic.
    """
    parts: list[str] = []
    if cfg.use_title:
        parts.append(workflow.title)
    if cfg.use_description:
        parts.append(workflow.description)
    if cfg.use_tools:
        parts.append(" ".join(workflow.tools))
    return ". ".join(parts)
