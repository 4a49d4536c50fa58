"""Class-level knowledge payloads and the progressive concept-removal study.

Payloads package the same per-class evidence statistics in three shapes —
templated prose, one flat JSON document, and named graph-query results —
for downstream consumers.  The ablation study removes the top-ranked
concepts cumulatively from every image of a class and tracks accuracy.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .backends.base import OperatorSuite
from .engine import apply_mask_policy
from .errors import GroundingFailure
from .formatting import sig9
from .io import DatasetManifest, ManifestEntry, dump_json, load_manifest
from .metrics import importance_per_area
from .ontology import EvidenceGraph, class_concept_stats, concept_cooccurrence
from .types import BinaryMask, ImageRecord, normalize_concept

PAYLOAD_SETTINGS = ("unstructured", "flat-json", "ontology")

#: how many top-ranked concepts the removal ladder uses
ABLATION_TOP = 3

ABLATION_COLUMNS = ("classifier", "class", "k", "n_images", "accuracy")

GLOBAL_CLASS = "all"


@dataclass(frozen=True)
class KnowledgePayload:
    """One class summary in one setting, with evidence provenance."""

    setting: str
    class_name: str
    body: Union[str, dict]
    provenance: tuple[str, ...]

    def __post_init__(self):
        if self.setting not in PAYLOAD_SETTINGS:
            raise ValueError(f"setting must be one of {PAYLOAD_SETTINGS}")


@dataclass(frozen=True)
class AblationPoint:
    """Accuracy after cumulatively removing ``k`` ranked concepts."""

    classifier_id: str
    class_name: str
    k: int
    n_images: int
    accuracy: float
    removed_concepts: tuple[str, ...]
    n_grounding_misses: int

    def __post_init__(self):
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError(f"accuracy out of [0, 1]: {self.accuracy}")
        if self.k < 0:
            raise ValueError("k must be >= 0")


def _nine(value: float) -> float:
    """Floats are shared across settings at nine significant digits."""
    return float(sig9(value))


def _class_source(graph: EvidenceGraph, class_name: str):
    stats = class_concept_stats(graph, class_name)
    if not stats:
        raise ValueError(f"class {class_name!r} has no evidence to report")
    images = graph.images_predicted_as(class_name)
    provenance = []
    for image_id in images:
        for eid, _attrs in graph.evidence_for_image(image_id):
            provenance.append(eid)
    concept_rows = [
        {
            "concept": s.concept,
            "n_evidence": s.n_evidence,
            "support_fraction": _nine(s.support_fraction),
            "mean_contribution": _nine(s.mean_contribution),
            "mean_cdp": _nine(s.mean_cdp),
            "mean_mask_area": _nine(s.mean_mask_area),
            "mean_normalized_importance": _nine(s.mean_normalized_importance),
        }
        for s in stats
    ]
    return concept_rows, len(images), tuple(sorted(provenance))


def build_payload(
    graph: EvidenceGraph, class_name: str, setting: str
) -> KnowledgePayload:
    """Build one setting's payload; all settings share the same numbers.

    The prose and flat-JSON settings carry the per-concept statistics; the
    ontology setting additionally attaches named query results, including
    the co-occurrence table the flat form omits.
    """
    if setting not in PAYLOAD_SETTINGS:
        raise ValueError(f"setting must be one of {PAYLOAD_SETTINGS}, got {setting!r}")
    rows, n_images, provenance = _class_source(graph, class_name)
    n_evidence = sum(r["n_evidence"] for r in rows)

    if setting == "unstructured":
        lines = [
            f"Concept influence summary for class '{class_name}': "
            f"{n_evidence} interventions across {n_images} images.",
            "",
        ]
        for row in rows:
            lines.append(
                f"- '{row['concept']}' appears in {row['n_evidence']} of "
                f"{n_images} images (support fraction "
                f"{sig9(row['support_fraction'])}). Removing it drops the "
                f"class confidence by {sig9(row['mean_cdp'])}% on average "
                f"(mean contribution {sig9(row['mean_contribution'])}), while "
                f"covering {sig9(row['mean_mask_area'])}% of the image; its "
                f"size-normalized importance is "
                f"{sig9(row['mean_normalized_importance'])}."
            )
        body: Union[str, dict] = "\n".join(lines) + "\n"
    elif setting == "flat-json":
        body = {
            "class": class_name,
            "n_images": n_images,
            "n_evidence": n_evidence,
            "concepts": rows,
        }
    else:  # ontology
        cooccurrence = [
            {
                "concept_a": c.concept_a,
                "concept_b": c.concept_b,
                "joint_count": c.joint_count,
                "p_a_given_b": _nine(c.p_a_given_b),
                "p_b_given_a": _nine(c.p_b_given_a),
            }
            for c in concept_cooccurrence(graph, class_name)
        ]
        ranked = sorted(
            rows, key=lambda r: (-r["mean_normalized_importance"], r["concept"])
        )
        body = {
            "class": class_name,
            "n_images": n_images,
            "n_evidence": n_evidence,
            "queries": {
                "class-concept-stats": rows,
                "concept-cooccurrence": cooccurrence,
                "top-k-concepts": {
                    "ranking": "mean_normalized_importance",
                    "k": ABLATION_TOP,
                    "results": [r["concept"] for r in ranked[:ABLATION_TOP]],
                },
            },
        }
    return KnowledgePayload(
        setting=setting, class_name=class_name, body=body, provenance=provenance
    )


def write_payloads(
    graph: EvidenceGraph,
    class_name: str,
    out_dir: Union[str, Path],
    settings: Sequence[str] = PAYLOAD_SETTINGS,
) -> dict[str, Path]:
    """Write payload files under ``out_dir/<class>/``; returns the paths.

    Prose lands in ``unstructured.txt``; the structured settings land in
    ``<setting>.json`` with the provenance list alongside the body.
    """
    class_dir = Path(out_dir) / class_name
    class_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for setting in settings:
        payload = build_payload(graph, class_name, setting)
        if setting == "unstructured":
            path = class_dir / "unstructured.txt"
            path.write_text(payload.body, encoding="utf-8")
        else:
            path = class_dir / f"{setting}.json"
            dump_json(
                {
                    "setting": setting,
                    "class": class_name,
                    "body": payload.body,
                    "provenance": list(payload.provenance),
                },
                path,
            )
        written[setting] = path
    return written


# --- progressive ablation ---------------------------------------------------


def ablation_ranking(
    graph: EvidenceGraph,
    class_name: Optional[str] = None,
    top: int = ABLATION_TOP,
) -> list[str]:
    """Most influential concepts by mean size-normalized importance.

    With a class, ranks that class's concepts; without one, aggregates over
    every evidence record in the graph.  Descending importance, ties on
    concept text.
    """
    if class_name is not None:
        stats = class_concept_stats(graph, class_name)
        ranked = sorted(
            stats, key=lambda s: (-s.mean_normalized_importance, s.concept)
        )
        return [s.concept for s in ranked[:top]]
    groups: dict[str, list[float]] = {}
    for (kind, _identifier), attrs in sorted(graph.nodes.items()):
        if kind != "evidence":
            continue
        groups.setdefault(attrs["concept"], []).append(
            importance_per_area(attrs["confidence_drop_pct"], attrs["mask_area_pct"])
        )
    ranked_global = sorted(
        ((math.fsum(v) / len(v), concept) for concept, v in groups.items()),
        key=lambda pair: (-pair[0], pair[1]),
    )
    return [concept for _score, concept in ranked_global[:top]]


def removal_set(ranking: Sequence[str], k: int) -> tuple[str, ...]:
    """The ``k`` least influential concepts of the ranking, in rank order.

    ``k`` beyond the ranking length removes everything ranked.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return ()
    return tuple(ranking[max(0, len(ranking) - k):])


def _evaluate_entry(
    manifest: DatasetManifest,
    entry: ManifestEntry,
    suite: OperatorSuite,
    removed: tuple[str, ...],
    mask_policy: str,
) -> tuple[bool, int]:
    """(prediction correct?, grounding misses) for one image."""
    image = manifest.load_image(entry)
    union: Optional[np.ndarray] = None
    misses = 0
    for concept_text in removed:
        try:
            mask = suite.ground_concept(image, normalize_concept(concept_text))
            mask = apply_mask_policy(mask, image, mask_policy)
        except (GroundingFailure, ValueError):
            misses += 1
            continue
        union = mask.bits.copy() if union is None else (union | mask.bits)
    if union is not None and union.any():
        pixels = suite.remove_region(image, BinaryMask.from_array(union))
        scored = ImageRecord(image_id=image.image_id, pixels=pixels)
    else:
        scored = image
    scores = suite.classify(scored)
    predicted = scores.class_names[scores.argmax_index()]
    return predicted == entry.gt_class, misses


def progressive_ablation(
    manifest: Union[DatasetManifest, str, Path],
    suite: OperatorSuite,
    graph: EvidenceGraph,
    class_name: Optional[str] = None,
    ks: Sequence[int] = (0, 1, 2, 3),
    classifier_id: str = "classifier",
    workers: int = 1,
    mask_policy: str = "error",
) -> list[AblationPoint]:
    """Accuracy after cumulative removal of the ranked concepts.

    ``k = 0`` is the unedited baseline; higher ``k`` removes the ``k``
    least influential of the top-ranked concepts as one union-mask edit per
    image.  Accuracy is measured against the manifest's ``gt_class``.  With
    a class name, only that class's images are scored and the ranking is
    class-local; otherwise the whole dataset and a global ranking are used.
    """
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    entries = [
        e for e in manifest.entries
        if class_name is None or e.gt_class == class_name
    ]
    if not entries:
        raise ValueError(f"no manifest images for class {class_name!r}")
    for entry in entries:
        if entry.gt_class is None:
            raise ValueError(
                f"manifest entry {entry.image_id!r} lacks gt_class; "
                "ablation accuracy needs ground-truth classes"
            )
    ranking = ablation_ranking(graph, class_name)
    points = []
    for k in ks:
        removed = removal_set(ranking, k)

        def score(entry: ManifestEntry) -> tuple[bool, int]:
            return _evaluate_entry(manifest, entry, suite, removed, mask_policy)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(score, entries))
        else:
            results = [score(entry) for entry in entries]
        n_correct = sum(1 for correct, _misses in results if correct)
        points.append(AblationPoint(
            classifier_id=classifier_id,
            class_name=class_name if class_name is not None else GLOBAL_CLASS,
            k=k,
            n_images=len(entries),
            accuracy=n_correct / len(entries),
            removed_concepts=removed,
            n_grounding_misses=sum(m for _correct, m in results),
        ))
    return points


def write_ablation_csv(points: Sequence[AblationPoint], path: Union[str, Path]) -> Path:
    """CSV with columns (classifier, class, k, n_images, accuracy)."""
    import csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(ABLATION_COLUMNS)
        for point in points:
            writer.writerow([
                point.classifier_id, point.class_name, point.k,
                point.n_images, sig9(point.accuracy),
            ])
    return path
