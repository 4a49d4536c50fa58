"""Aggregation queries over the evidence graph.

Every query is a pure function of the stored evidence multiset: results are
computed on demand and never cached or materialized into the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..metrics import importance_per_area
from .graph import EvidenceGraph

RANKINGS = ("mean_cdp", "mean_normalized_importance")

QUERY_NAMES = ("class-concept-stats", "concept-cooccurrence", "top-k-concepts")


@dataclass(frozen=True)
class ClassConceptStat:
    """Aggregated dependence of one class on one concept."""

    class_name: str
    concept: str
    n_evidence: int
    mean_contribution: float
    mean_cdp: float
    mean_mask_area: float
    mean_normalized_importance: float
    support_fraction: float

    def __post_init__(self):
        if self.n_evidence < 1:
            raise ValueError("n_evidence must be >= 1")
        if not (0.0 < self.support_fraction <= 1.0):
            raise ValueError(
                f"support_fraction out of (0, 1]: {self.support_fraction}"
            )


@dataclass(frozen=True)
class CooccurrenceStat:
    """Joint appearance of two concepts on images of one class."""

    class_name: str
    concept_a: str
    concept_b: str
    joint_count: int
    p_a_given_b: float
    p_b_given_a: float


def _require_class(graph: EvidenceGraph, class_name: str) -> None:
    if not graph.has_node("class", class_name):
        known = ", ".join(graph.class_names()) or "<none>"
        raise ValueError(f"unknown class {class_name!r}; graph has: {known}")


def _class_evidence(graph: EvidenceGraph, class_name: str):
    """(image ids, [(image_id, evidence_id, attrs), ...]) for one class."""
    _require_class(graph, class_name)
    images = graph.images_predicted_as(class_name)
    rows = []
    for image_id in images:
        for eid, attrs in graph.evidence_for_image(image_id):
            rows.append((image_id, eid, attrs))
    rows.sort(key=lambda row: row[1])
    return images, rows


def class_concept_stats(graph: EvidenceGraph, class_name: str) -> list[ClassConceptStat]:
    """Per-concept aggregate effects over images predicted as ``class_name``.

    Ordered by descending mean confidence-drop percentage, then concept text.
    """
    images, rows = _class_evidence(graph, class_name)
    by_concept: dict[str, list[dict]] = {}
    for _image_id, _eid, attrs in rows:
        by_concept.setdefault(attrs["concept"], []).append(attrs)
    stats = []
    for concept, group in by_concept.items():
        n = len(group)
        stats.append(ClassConceptStat(
            class_name=class_name,
            concept=concept,
            n_evidence=n,
            mean_contribution=math.fsum(a["contribution"] for a in group) / n,
            mean_cdp=math.fsum(a["confidence_drop_pct"] for a in group) / n,
            mean_mask_area=math.fsum(a["mask_area_pct"] for a in group) / n,
            mean_normalized_importance=math.fsum(
                importance_per_area(a["confidence_drop_pct"], a["mask_area_pct"])
                for a in group
            ) / n,
            support_fraction=n / len(images),
        ))
    stats.sort(key=lambda s: (-s.mean_cdp, s.concept))
    return stats


def concept_cooccurrence(graph: EvidenceGraph, class_name: str) -> list[CooccurrenceStat]:
    """Concept pairs sharing images of one class, with conditional fractions.

    ``p_a_given_b`` is the fraction of the class's images carrying concept b
    that also carry concept a.  Pairs that never co-occur are omitted.
    Ordered by descending joint count, then pair text.
    """
    images, rows = _class_evidence(graph, class_name)
    concepts_by_image: dict[str, set[str]] = {i: set() for i in images}
    for image_id, _eid, attrs in rows:
        concepts_by_image[image_id].add(attrs["concept"])
    image_count: dict[str, int] = {}
    joint: dict[tuple[str, str], int] = {}
    for present in concepts_by_image.values():
        ordered = sorted(present)
        for concept in ordered:
            image_count[concept] = image_count.get(concept, 0) + 1
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                joint[(a, b)] = joint.get((a, b), 0) + 1
    out = [
        CooccurrenceStat(
            class_name=class_name,
            concept_a=a,
            concept_b=b,
            joint_count=count,
            p_a_given_b=count / image_count[b],
            p_b_given_a=count / image_count[a],
        )
        for (a, b), count in joint.items()
    ]
    out.sort(key=lambda s: (-s.joint_count, s.concept_a, s.concept_b))
    return out


def top_k_concepts(
    graph: EvidenceGraph,
    class_name: str,
    k: int,
    ranking: str = "mean_cdp",
) -> list[ClassConceptStat]:
    """Top ``k`` concepts for a class by the chosen statistic.

    Ties break on concept text; fewer than ``k`` are returned when the class
    has fewer concepts.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if ranking not in RANKINGS:
        raise ValueError(f"ranking must be one of {RANKINGS}, got {ranking!r}")
    stats = class_concept_stats(graph, class_name)
    stats.sort(key=lambda s: (-getattr(s, ranking), s.concept))
    return stats[:k]
