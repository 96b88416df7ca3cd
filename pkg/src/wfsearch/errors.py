"""Exception taxonomy shared by every module.

Each error carries a short machine-parseable ``code`` so the CLI and the
HTTP service can surface failures uniformly.
"""

from __future__ import annotations


class WorkflowSearchError(Exception):
    """Base class; ``code`` is a stable snake_case identifier."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# corpus / ingestion

class MalformedGaError(WorkflowSearchError):
    code = "malformed_ga"


class NetworkError(WorkflowSearchError):
    code = "network_error"


class SchemaError(WorkflowSearchError):
    code = "schema_error"


class DuplicateIdError(WorkflowSearchError):
    code = "duplicate_id"


class IngestIoError(WorkflowSearchError):
    code = "io_error"


# lexical / retrieval

class EmptyCorpusError(WorkflowSearchError):
    code = "empty_corpus"


class BadParamError(WorkflowSearchError):
    code = "bad_param"


class EmptyQueryError(WorkflowSearchError):
    code = "empty_query"


# embeddings

class BadDimError(WorkflowSearchError):
    code = "bad_dim"


class AuthError(WorkflowSearchError):
    code = "auth_error"


class RateLimitedError(WorkflowSearchError):
    code = "rate_limited"


# dense search

class DimMismatchError(WorkflowSearchError):
    code = "dim_mismatch"


class EmptyIndexError(WorkflowSearchError):
    code = "empty_index"


class EmptyMatrixError(WorkflowSearchError):
    code = "empty_matrix"


# reranking

class TooManyCandidatesError(WorkflowSearchError):
    code = "too_many_candidates"


class UnparseableError(WorkflowSearchError):
    code = "unparseable"


class ClientError(WorkflowSearchError):
    code = "client_error"


# benchmark generation

class TooFewPointsError(WorkflowSearchError):
    code = "too_few_points"


class InsufficientKeywordsError(WorkflowSearchError):
    code = "insufficient_keywords"


class UnknownSeedError(WorkflowSearchError):
    code = "unknown_seed"


# evaluation

class EmptyGoldError(WorkflowSearchError):
    code = "empty_gold"


class UnknownQueryError(WorkflowSearchError):
    code = "unknown_query"
