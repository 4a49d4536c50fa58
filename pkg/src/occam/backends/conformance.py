"""Black-box conformance checks any operator backend must pass.

Reused by this package's own backends and by external bridges: point
``check_operator_suite`` at a live suite plus one probe image and it
verifies reply shapes, determinism, the edit locality guarantee, and
grounding-failure behavior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import GroundingFailure
from ..types import ImageRecord, normalize_concept


@dataclass(frozen=True)
class ConformanceResult:
    check: str
    passed: bool
    detail: str = ""


def check_operator_suite(
    suite,
    image: ImageRecord,
    groundable_concept: Optional[str] = None,
    ungroundable_concept: Optional[str] = None,
    check_embedding: bool = True,
) -> list[ConformanceResult]:
    """Run every applicable check; returns one result per check, never raises.

    ``groundable_concept`` defaults to the backend's own first proposal.
    """
    results: list[ConformanceResult] = []

    def run(name: str, fn: Callable[[], Optional[str]]) -> None:
        try:
            detail = fn()
        except Exception as exc:
            results.append(ConformanceResult(name, False, f"{type(exc).__name__}: {exc}"))
        else:
            results.append(ConformanceResult(name, detail is None, detail or ""))

    proposals: list[str] = []

    def check_propose() -> Optional[str]:
        nonlocal proposals
        proposals = suite.propose_concepts(image)
        if not isinstance(proposals, list):
            return f"propose returned {type(proposals).__name__}, not list"
        bad = [c for c in proposals if not isinstance(c, str)]
        if bad:
            return f"non-string proposals: {bad[:3]!r}"
        return None

    run("propose-shape", check_propose)

    def check_classify() -> Optional[str]:
        first = suite.classify(image)
        second = suite.classify(image)
        if first.class_names != second.class_names:
            return "class list changed between identical calls"
        if not np.array_equal(first.scores, second.scores):
            return "scores changed between identical calls"
        return None

    run("classify-deterministic", check_classify)

    concept_text = groundable_concept
    if concept_text is None and proposals:
        concept_text = proposals[0]

    if concept_text is not None:
        concept = normalize_concept(concept_text)

        mask_box: list = []

        def check_ground() -> Optional[str]:
            mask = suite.ground_concept(image, concept)
            if (mask.height, mask.width) != (image.height, image.width):
                return (
                    f"mask {mask.height}x{mask.width} does not match image "
                    f"{image.height}x{image.width}"
                )
            if mask.positive_count < 1:
                return "mask has no positive pixels"
            mask_box.append(mask)
            return None

        run("ground-mask-shape", check_ground)

        def check_edit() -> Optional[str]:
            if not mask_box:
                return "skipped: grounding failed"
            mask = mask_box[0]
            edited = suite.remove_region(image, mask)
            if edited.shape != image.pixels.shape or edited.dtype != np.uint8:
                return f"edited image has shape {edited.shape} dtype {edited.dtype}"
            outside = ~mask.bits
            if not np.array_equal(edited[outside], image.pixels[outside]):
                return "pixels outside the mask were altered"
            return None

        run("edit-locality", check_edit)

    if ungroundable_concept is not None:
        absent = normalize_concept(ungroundable_concept)

        def check_failure() -> Optional[str]:
            try:
                suite.ground_concept(image, absent)
            except GroundingFailure:
                return None
            return "expected a grounding failure, got a mask"

        run("ground-failure", check_failure)

    if check_embedding:

        def check_embed() -> Optional[str]:
            a = suite.embed_text("sample text")
            b = suite.embed_text("sample text")
            a = np.asarray(a, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if a.ndim != 1 or a.size < 2:
                return f"embedding has shape {a.shape}, need a 1-D vector of dim >= 2"
            if not np.isfinite(a).all():
                return "embedding contains non-finite values"
            if not np.array_equal(a, b):
                return "identical text embedded differently"
            return None

        run("embed-deterministic", check_embed)

    return results


def assert_conformant(suite, image: ImageRecord, **kwargs) -> None:
    """AssertionError listing every failed check, if any."""
    results = check_operator_suite(suite, image, **kwargs)
    failed = [r for r in results if not r.passed]
    if failed:
        lines = "\n".join(f"  {r.check}: {r.detail}" for r in failed)
        raise AssertionError(f"operator suite failed conformance:\n{lines}")
