"""Operator endpoints and the five-operation backend contract.

Every model the pipeline touches sits behind one of five operations —
propose / ground / edit / classify / embed — served by interchangeable
backends (fixture replay, synthetic world, child process, HTTP). Adapters
normalize classifier output to probabilities; raw logits never cross this
boundary.
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, TypeVar

import numpy as np

from ..errors import TransportError
from ..types import BinaryMask, ConceptLabel, ImageRecord, ScoreVector

ENDPOINT_KINDS = ("fixture", "synthetic", "subprocess", "http")

#: The five operator slots an engine run draws from.
OPERATOR_NAMES = ("proposer", "grounder", "editor", "classifier", "embedder")

T = TypeVar("T")


@dataclass(frozen=True)
class OperatorEndpoint:
    """Where one operator lives: a fixture directory, a synthetic world file,
    a command line, or a base URL."""

    kind: str
    locator: str
    timeout: float = 30.0
    max_retries: int = 2
    options: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ENDPOINT_KINDS:
            raise ValueError(f"kind must be one of {ENDPOINT_KINDS}, got {self.kind!r}")
        if not self.locator:
            raise ValueError("locator must be non-empty")
        if not self.timeout > 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "locator": self.locator,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "options": dict(sorted(self.options.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OperatorEndpoint":
        return cls(
            kind=d["kind"],
            locator=d["locator"],
            timeout=d.get("timeout", 30.0),
            max_retries=d.get("max_retries", 2),
            options=dict(d.get("options", {})),
        )


class OperatorSuite(ABC):
    """One backend serving all five operations.

    Contract highlights:
    - ``propose_concepts`` returns raw strings in backend order (the caller
      normalizes and deduplicates);
    - ``ground_concept`` raises GroundingFailure instead of ever returning a
      mask without positive pixels;
    - ``remove_region`` leaves every pixel outside the mask bit-identical;
    - ``classify`` returns probabilities (ScoreVector enforces the sum);
    - ``embed_text`` returns a fixed-dimension float64 vector.
    """

    @abstractmethod
    def propose_concepts(self, image: ImageRecord) -> list[str]:
        ...

    @abstractmethod
    def ground_concept(self, image: ImageRecord, concept: ConceptLabel) -> BinaryMask:
        ...

    @abstractmethod
    def remove_region(self, image: ImageRecord, mask: BinaryMask) -> np.ndarray:
        ...

    @abstractmethod
    def classify(self, image: ImageRecord) -> ScoreVector:
        ...

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray:
        ...

    def close(self) -> None:  # pragma: no cover - default no-op
        pass

    def __enter__(self) -> "OperatorSuite":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class CompositeSuite(OperatorSuite):
    """Routes each operation to a possibly different backend."""

    def __init__(self, parts: Mapping[str, OperatorSuite]):
        missing = [op for op in OPERATOR_NAMES if op not in parts]
        if missing:
            raise ValueError(f"missing operator backends: {missing}")
        self._parts = dict(parts)

    def propose_concepts(self, image: ImageRecord) -> list[str]:
        return self._parts["proposer"].propose_concepts(image)

    def ground_concept(self, image: ImageRecord, concept: ConceptLabel) -> BinaryMask:
        return self._parts["grounder"].ground_concept(image, concept)

    def remove_region(self, image: ImageRecord, mask: BinaryMask) -> np.ndarray:
        return self._parts["editor"].remove_region(image, mask)

    def classify(self, image: ImageRecord) -> ScoreVector:
        return self._parts["classifier"].classify(image)

    def embed_text(self, text: str) -> np.ndarray:
        return self._parts["embedder"].embed_text(text)

    def close(self) -> None:
        for suite in {id(s): s for s in self._parts.values()}.values():
            suite.close()


def call_with_retries(
    fn: Callable[[], T],
    max_retries: int,
    base_delay: float = 0.05,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Run ``fn``, retrying only TransportError with exponential backoff.
    Protocol errors and everything else propagate immediately."""
    attempt = 0
    while True:
        try:
            return fn()
        except TransportError:
            if attempt >= max_retries:
                raise
            sleep(base_delay * (2**attempt))
            attempt += 1


def build_suite(endpoint: OperatorEndpoint) -> OperatorSuite:
    """Instantiate the backend a single endpoint describes."""
    if endpoint.kind == "synthetic":
        from .synthetic import SyntheticSuite

        return SyntheticSuite.from_world_file(endpoint.locator, options=endpoint.options)
    if endpoint.kind == "fixture":
        from .fixture import FixtureSuite

        return FixtureSuite(endpoint.locator)
    if endpoint.kind == "subprocess":
        from .remote import SubprocessSuite

        return SubprocessSuite(
            endpoint.locator, timeout=endpoint.timeout, max_retries=endpoint.max_retries,
            options=endpoint.options,
        )
    if endpoint.kind == "http":
        from .remote import HttpSuite

        return HttpSuite(
            endpoint.locator, timeout=endpoint.timeout, max_retries=endpoint.max_retries,
            options=endpoint.options,
        )
    raise ValueError(f"unknown endpoint kind {endpoint.kind!r}")


def resolve_suite(
    endpoints: Mapping[str, OperatorEndpoint],
    default: Optional[OperatorEndpoint] = None,
) -> OperatorSuite:
    """Build the operator suite for a run. ``endpoints`` may override any of
    the five slots; ``default`` covers the rest. Identical endpoints share
    one backend instance."""
    import json

    resolved: dict[str, OperatorEndpoint] = {}
    for op in OPERATOR_NAMES:
        ep = endpoints.get(op, default)
        if ep is None:
            raise ValueError(f"no endpoint for operator {op!r} and no default")
        resolved[op] = ep
    # Share one backend instance per distinct endpoint description.
    unique: dict[str, OperatorSuite] = {}
    keys: dict[str, str] = {}
    for op, ep in resolved.items():
        key = json.dumps(ep.to_dict(), sort_keys=True, default=str)
        keys[op] = key
        if key not in unique:
            unique[key] = build_suite(ep)
    if len(unique) == 1:
        return next(iter(unique.values()))
    return CompositeSuite({op: unique[keys[op]] for op in resolved})
