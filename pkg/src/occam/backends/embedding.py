"""Deterministic text embedder: sparse hashed bag-of-tokens indicators.

Identical strings embed identically; token-disjoint strings are orthogonal
(up to hash collisions, which the small dimension makes astronomically
unlikely for the short labels this pipeline embeds). Useful as a test double
and as the default embedder when no model-backed endpoint is configured.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

EMBEDDING_DIM = 4096

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def token_index(token: str, dim: int = EMBEDDING_DIM) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dim


def embed_tokens(text: str, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Indicator vector with a 1.0 at each distinct token's hashed index."""
    if not str(text):
        raise ValueError("cannot embed empty text")
    vec = np.zeros(dim, dtype=np.float64)
    for token in set(tokenize(text)):
        vec[token_index(token, dim)] = 1.0
    return vec


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Plain cosine; zero if either vector is all-zero."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
