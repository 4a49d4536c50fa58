"""Targeted constraint checking over evidence graphs.

Not a full reasoner: the checks cover edge domain/range typing, evidence
cardinality, image-to-class cardinality, dangling endpoints, and artifact
reference typing.  Violations are returned as data, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import ARTIFACT_ATTRS, EDGE_TYPES, NODE_KINDS, EvidenceGraph

VIOLATION_KINDS = (
    "artifact-typing",
    "dangling-endpoint",
    "domain-range",
    "evidence-cardinality",
    "image-class-cardinality",
)


@dataclass(frozen=True)
class Violation:
    """One constraint breach; ``kind`` is one of ``VIOLATION_KINDS``."""

    kind: str
    detail: str

    def __post_init__(self):
        if self.kind not in VIOLATION_KINDS:
            raise ValueError(f"unknown violation kind: {self.kind!r}")


def check_consistency(graph: EvidenceGraph) -> list[Violation]:
    """Return every constraint violation; an empty list means consistent."""
    found: list[Violation] = []

    def report(kind: str, detail: str) -> None:
        found.append(Violation(kind, detail))

    for kind, identifier in graph.nodes:
        if kind not in NODE_KINDS:
            report("domain-range",
                   f"node {identifier!r} has unknown kind {kind!r}")

    for edge in sorted(graph.edges):
        label = (f"{edge.predicate} edge "
                 f"{edge.subject[0]}:{edge.subject[1]!r} -> "
                 f"{edge.object[0]}:{edge.object[1]!r}")
        if edge.predicate not in EDGE_TYPES:
            report("domain-range", f"unknown edge predicate in {label}")
            continue
        domain, range_ = EDGE_TYPES[edge.predicate]
        if edge.subject[0] != domain:
            report("domain-range",
                   f"{label}: subject must be a {domain} node")
        if edge.object[0] != range_:
            report("domain-range",
                   f"{label}: object must be a {range_} node")
        if edge.subject not in graph.nodes:
            report("dangling-endpoint", f"{label}: subject node is absent")
        if edge.object not in graph.nodes:
            report("dangling-endpoint", f"{label}: object node is absent")

    for key in sorted(graph.nodes):
        kind, identifier = key
        if kind == "evidence":
            for predicate in ("evidence-of-image", "evidence-of-concept"):
                count = len(graph.objects_of(key, predicate))
                if count != 1:
                    report(
                        "evidence-cardinality",
                        f"evidence {identifier!r} has {count} "
                        f"{predicate} edges (exactly 1 required)",
                    )
            attrs = graph.nodes[key]
            for attr in ARTIFACT_ATTRS:
                value = attrs.get(attr)
                if not isinstance(value, str) or not value:
                    report(
                        "artifact-typing",
                        f"evidence {identifier!r} needs a non-empty "
                        f"{attr} artifact reference",
                    )
        elif kind == "image":
            predictions = len(graph.objects_of(key, "image-predicted-as-class"))
            has_evidence = bool(graph.subjects_of(key, "evidence-of-image"))
            if has_evidence and predictions != 1:
                report(
                    "image-class-cardinality",
                    f"image {identifier!r} carries evidence but has "
                    f"{predictions} predicted-class edges (exactly 1 required)",
                )
            elif predictions > 1:
                report(
                    "image-class-cardinality",
                    f"image {identifier!r} has {predictions} predicted-class "
                    f"edges (at most 1 allowed)",
                )

    found.sort(key=lambda v: (v.kind, v.detail))
    return found
