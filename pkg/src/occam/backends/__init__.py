"""Pluggable operator backends behind five stable operations."""

from .base import (
    ENDPOINT_KINDS,
    OPERATOR_NAMES,
    CompositeSuite,
    OperatorEndpoint,
    OperatorSuite,
    build_suite,
    call_with_retries,
    resolve_suite,
)
from .conformance import ConformanceResult, assert_conformant, check_operator_suite
from .embedding import EMBEDDING_DIM, cosine_similarity, embed_tokens, tokenize
from .fixture import FixtureSuite, RecordingSuite
from .remote import HttpSuite, OperatorHTTPServer, SubprocessSuite
from .synthetic import SyntheticSuite

__all__ = [
    "EMBEDDING_DIM",
    "ENDPOINT_KINDS",
    "OPERATOR_NAMES",
    "CompositeSuite",
    "ConformanceResult",
    "FixtureSuite",
    "HttpSuite",
    "OperatorEndpoint",
    "OperatorHTTPServer",
    "OperatorSuite",
    "RecordingSuite",
    "SubprocessSuite",
    "SyntheticSuite",
    "assert_conformant",
    "build_suite",
    "call_with_retries",
    "check_operator_suite",
    "cosine_similarity",
    "embed_tokens",
    "resolve_suite",
    "tokenize",
]
