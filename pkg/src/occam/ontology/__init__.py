"""Evidence graph construction, queries, Turtle round-trip, validation."""

from .consistency import VIOLATION_KINDS, Violation, check_consistency
from .graph import (
    ARTIFACT_ATTRS,
    EDGE_TYPES,
    NODE_KINDS,
    Edge,
    EvidenceGraph,
    build_graph,
    merge_graphs,
)
from .queries import (
    QUERY_NAMES,
    RANKINGS,
    ClassConceptStat,
    CooccurrenceStat,
    class_concept_stats,
    concept_cooccurrence,
    top_k_concepts,
)
from .turtle import (
    ATTRIBUTE_PREDICATES,
    EDGE_PREDICATES,
    VOCAB_IRI,
    export_turtle,
    import_turtle,
    node_iri,
)

__all__ = [
    "ARTIFACT_ATTRS",
    "ATTRIBUTE_PREDICATES",
    "EDGE_PREDICATES",
    "EDGE_TYPES",
    "NODE_KINDS",
    "QUERY_NAMES",
    "RANKINGS",
    "VIOLATION_KINDS",
    "VOCAB_IRI",
    "ClassConceptStat",
    "CooccurrenceStat",
    "Edge",
    "EvidenceGraph",
    "Violation",
    "build_graph",
    "check_consistency",
    "class_concept_stats",
    "concept_cooccurrence",
    "export_turtle",
    "import_turtle",
    "merge_graphs",
    "node_iri",
    "top_k_concepts",
]
