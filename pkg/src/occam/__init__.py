"""Interventional concept explanations for black-box image classifiers.

The package measures which visual concepts a classifier's decisions depend
on by editing each concept out of the image and re-classifying, then
aggregates the resulting evidence into metrics, an evidence graph with a
Turtle serialization, class knowledge payloads, and progressive-ablation
curves.  Operator backends (concept proposal, grounding, editing,
classification, embedding) are pluggable and replayable from recorded
fixtures.

Typical entry points:

- :func:`run_dataset` / :class:`ConceptInterventionExplainer` — run the
  intervention pipeline over a dataset manifest.
- :mod:`occam.metrics` — per-intervention and localization scores.
- :func:`build_graph`, :func:`export_turtle` — ontology construction.
- :func:`write_metrics_report`, :func:`write_payloads`,
  :func:`progressive_ablation` — reports.
- ``occam`` console script (:mod:`occam.cli`) — everything from the shell.
"""

from .engine import (
    ConceptInterventionExplainer,
    DiscardedConcept,
    ImageOutcome,
    RunCounters,
    RunResult,
    apply_mask_policy,
    load_run_result,
    run_dataset,
    run_image,
)
from .errors import (
    ClassificationError,
    GenerationError,
    GroundingFailure,
    IngestionError,
    OccamError,
    ProtocolError,
    RejectedConceptError,
    TransportError,
    TurtleImportError,
    TurtleParseError,
    UndefinedAggregateError,
    UndefinedScoreError,
)
from .evaluate import write_metrics_report
from .io import DatasetManifest, ManifestEntry, RunStore, load_manifest
from .metrics import (
    ActivationMap,
    ImageAggregate,
    aggregate_image,
    align_concepts,
    confidence_drop_pct,
    epg,
    hit_rate,
    importance_per_area,
    logit_delta,
    mask_area_pct,
    mask_to_activation,
    normalized_importance,
    nra,
    pct_logit_drop,
)
from .ontology import (
    EvidenceGraph,
    build_graph,
    check_consistency,
    class_concept_stats,
    concept_cooccurrence,
    export_turtle,
    import_turtle,
    merge_graphs,
    top_k_concepts,
)
from .reporting import (
    AblationPoint,
    KnowledgePayload,
    build_payload,
    progressive_ablation,
    removal_set,
    write_ablation_csv,
    write_payloads,
)
from .types import (
    BinaryMask,
    ConceptLabel,
    EvidenceRecord,
    ImageRecord,
    RunConfig,
    ScoreVector,
    normalize_concept,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationMap",
    "AblationPoint",
    "BinaryMask",
    "ClassificationError",
    "ConceptInterventionExplainer",
    "ConceptLabel",
    "DatasetManifest",
    "DiscardedConcept",
    "EvidenceGraph",
    "EvidenceRecord",
    "GenerationError",
    "GroundingFailure",
    "ImageAggregate",
    "ImageOutcome",
    "ImageRecord",
    "IngestionError",
    "KnowledgePayload",
    "ManifestEntry",
    "OccamError",
    "ProtocolError",
    "RejectedConceptError",
    "RunConfig",
    "RunCounters",
    "RunResult",
    "RunStore",
    "ScoreVector",
    "TransportError",
    "TurtleImportError",
    "TurtleParseError",
    "UndefinedAggregateError",
    "UndefinedScoreError",
    "aggregate_image",
    "align_concepts",
    "apply_mask_policy",
    "build_graph",
    "build_payload",
    "check_consistency",
    "class_concept_stats",
    "concept_cooccurrence",
    "confidence_drop_pct",
    "epg",
    "export_turtle",
    "hit_rate",
    "import_turtle",
    "importance_per_area",
    "load_manifest",
    "load_run_result",
    "logit_delta",
    "mask_area_pct",
    "mask_to_activation",
    "merge_graphs",
    "normalize_concept",
    "normalized_importance",
    "nra",
    "pct_logit_drop",
    "progressive_ablation",
    "removal_set",
    "run_dataset",
    "run_image",
    "top_k_concepts",
    "write_ablation_csv",
    "write_metrics_report",
    "write_payloads",
]
