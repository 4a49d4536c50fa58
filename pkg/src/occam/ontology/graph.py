"""Typed evidence graph induced from intervention runs.

Nodes are classes, images, concepts, and evidence records; edges carry a
small closed set of predicates.  The graph stores raw evidence only —
aggregate statistics are computed by the query layer at query time and are
never materialized as edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..engine import RunResult
from ..errors import IngestionError

NODE_KINDS = ("class", "concept", "evidence", "image")

#: predicate -> (subject kind, object kind)
EDGE_TYPES: Mapping[str, tuple[str, str]] = {
    "concept-associated-to-image": ("concept", "image"),
    "image-predicted-as-class": ("image", "class"),
    "evidence-of-image": ("evidence", "image"),
    "evidence-of-concept": ("evidence", "concept"),
}

#: attribute keys that must reference stored artifacts on every evidence node
ARTIFACT_ATTRS = ("mask_ref", "edited_image_ref")

NodeKey = tuple[str, str]  # (kind, identifier)


@dataclass(frozen=True, order=True)
class Edge:
    """One typed edge between two node keys."""

    predicate: str
    subject: NodeKey
    object: NodeKey


@dataclass
class EvidenceGraph:
    """Container for typed nodes and edges from one or more runs.

    ``nodes`` maps ``(kind, identifier)`` to an attribute dict.  The
    structure is deliberately permissive — malformed graphs can be
    represented so that :func:`~occam.ontology.consistency.check_consistency`
    has something to report on.
    """

    run_id: str
    schema_version: int = 1
    nodes: dict[NodeKey, dict] = field(default_factory=dict)
    edges: set[Edge] = field(default_factory=set)

    # -- construction helpers -------------------------------------------

    def add_node(self, kind: str, identifier: str, attributes: dict) -> NodeKey:
        key = (kind, identifier)
        if key in self.nodes:
            if kind == "evidence":
                raise IngestionError(f"duplicate evidence node: {identifier!r}")
            if self.nodes[key] != attributes:
                raise IngestionError(
                    f"conflicting attributes for {kind} node {identifier!r}"
                )
        else:
            self.nodes[key] = dict(attributes)
        return key

    def add_edge(self, predicate: str, subject: NodeKey, object: NodeKey) -> None:
        self.edges.add(Edge(predicate, subject, object))

    # -- read access ----------------------------------------------------

    def has_node(self, kind: str, identifier: str) -> bool:
        return (kind, identifier) in self.nodes

    def identifiers(self, kind: str) -> list[str]:
        return sorted(i for k, i in self.nodes if k == kind)

    def attributes(self, kind: str, identifier: str) -> dict:
        return self.nodes[(kind, identifier)]

    def edges_with(self, predicate: str) -> list[Edge]:
        return sorted(e for e in self.edges if e.predicate == predicate)

    def objects_of(self, subject: NodeKey, predicate: str) -> list[NodeKey]:
        return sorted(e.object for e in self.edges
                      if e.subject == subject and e.predicate == predicate)

    def subjects_of(self, object: NodeKey, predicate: str) -> list[NodeKey]:
        return sorted(e.subject for e in self.edges
                      if e.object == object and e.predicate == predicate)

    @property
    def n_evidence(self) -> int:
        return sum(1 for k, _ in self.nodes if k == "evidence")

    def class_names(self) -> list[str]:
        return self.identifiers("class")

    def images_predicted_as(self, class_name: str) -> list[str]:
        """Image identifiers whose prediction edge points at ``class_name``."""
        key = ("class", class_name)
        return sorted(i for _, i in self.subjects_of(key, "image-predicted-as-class"))

    def evidence_for_image(self, image_id: str) -> list[tuple[str, dict]]:
        key = ("image", image_id)
        out = []
        for _, eid in self.subjects_of(key, "evidence-of-image"):
            if ("evidence", eid) in self.nodes:
                out.append((eid, self.nodes[("evidence", eid)]))
        return sorted(out, key=lambda pair: pair[0])


def build_graph(run: RunResult) -> EvidenceGraph:
    """Ingest one run: one evidence node per record, typed edges throughout.

    Only successfully classified images contribute nodes.  Rebuilding from
    the same run yields identical node identifiers and edge sets.
    """
    graph = EvidenceGraph(run_id=run.run_id)
    for outcome in run.outcomes:
        if outcome.status != "ok":
            continue
        image_attrs = {
            "image_id": outcome.image_id,
            "predicted_class_index": int(outcome.predicted_class_index),
            "predicted_class_name": outcome.predicted_class_name,
            "original_confidence": float(outcome.original_confidence),
        }
        if outcome.gt_class is not None:
            image_attrs["gt_class"] = outcome.gt_class
        image_key = graph.add_node("image", outcome.image_id, image_attrs)
        class_key = graph.add_node(
            "class", outcome.predicted_class_name,
            {"name": outcome.predicted_class_name},
        )
        graph.add_edge("image-predicted-as-class", image_key, class_key)
        for record in outcome.records:
            concept_key = graph.add_node(
                "concept", record.concept.normalized_text,
                {"text": record.concept.normalized_text},
            )
            evidence_attrs = record.to_dict()
            predicted = evidence_attrs.pop("predicted_class")
            evidence_attrs["predicted_class_index"] = int(predicted["index"])
            evidence_attrs["predicted_class_name"] = predicted["name"]
            evidence_attrs.pop("evidence_id")
            evidence_key = graph.add_node(
                "evidence", record.evidence_id, evidence_attrs
            )
            graph.add_edge("evidence-of-image", evidence_key, image_key)
            graph.add_edge("evidence-of-concept", evidence_key, concept_key)
            graph.add_edge("concept-associated-to-image", concept_key, image_key)
    return graph


def merge_graphs(graphs: Sequence[EvidenceGraph] | Iterable[EvidenceGraph]) -> EvidenceGraph:
    """Union the nodes and edges of several graphs under a joined run id.

    Evidence identifiers must be globally unique; shared class/image/concept
    nodes must agree attribute-for-attribute.
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("merge_graphs needs at least one graph")
    versions = {g.schema_version for g in graphs}
    if len(versions) != 1:
        raise IngestionError(f"cannot merge schema versions {sorted(versions)}")
    merged = EvidenceGraph(
        run_id="+".join(g.run_id for g in graphs),
        schema_version=graphs[0].schema_version,
    )
    for graph in graphs:
        for (kind, identifier), attrs in graph.nodes.items():
            merged.add_node(kind, identifier, attrs)
        merged.edges.update(graph.edges)
    return merged
