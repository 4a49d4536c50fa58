"""End-to-end interventional attribution: propose, ground, filter, edit,
re-classify, score.

Interventions are strictly one-at-a-time: every edit starts from the
original image, and the post-intervention confidence is always read at the
class index the ORIGINAL classification picked, even if the edited image's
argmax moved. Per-image work is sequential; images run in a bounded worker
pool and results are merged in a deterministic order, so worker count never
changes a single output byte.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator

from .errors import GroundingFailure, RejectedConceptError
from .io import DatasetManifest, RunStore, dump_json, load_json, load_manifest
from .metrics import (
    NORMALIZED_IMPORTANCE_FORMULA,
    PCT_LOGIT_DROP_FORMULA,
    aggregate_image,
    confidence_drop_pct,
    logit_delta,
    mask_area_pct,
    pct_logit_drop,
)
from .types import (
    BinaryMask,
    ConceptLabel,
    EvidenceRecord,
    ImageRecord,
    RunConfig,
    ScoreVector,
    evidence_id,
    normalize_concept,
)

logger = logging.getLogger(__name__)

#: Fixed discard reasons (stable strings, part of the manifest format).
DISCARD_REASONS = (
    "empty-concept",
    "duplicate",
    "grounding-failure",
    "dimension-mismatch",
    "area-excluded",
    "edit-failure",
    "classification-failure",
)


@dataclass(frozen=True)
class DiscardedConcept:
    concept_raw: str
    concept: str  # normalized text ("" when normalization itself failed)
    reason: str
    detail: str = ""

    def __post_init__(self):
        if self.reason not in DISCARD_REASONS:
            raise ValueError(f"unknown discard reason {self.reason!r}")

    def to_dict(self) -> dict:
        return {
            "concept_raw": self.concept_raw,
            "concept": self.concept,
            "reason": self.reason,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscardedConcept":
        return cls(
            concept_raw=d["concept_raw"],
            concept=d["concept"],
            reason=d["reason"],
            detail=d.get("detail", ""),
        )


@dataclass(frozen=True)
class ImageOutcome:
    """Everything the run learned about one image."""

    image_id: str
    status: str  # "ok" | "failed"
    predicted_class_index: Optional[int] = None
    predicted_class_name: Optional[str] = None
    original_confidence: Optional[float] = None
    gt_class: Optional[str] = None
    records: tuple[EvidenceRecord, ...] = ()
    discarded: tuple[DiscardedConcept, ...] = ()
    failure_reason: str = ""

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError(f"status must be ok|failed, got {self.status!r}")
        if self.status == "ok" and self.predicted_class_name is None:
            raise ValueError("an ok outcome needs the original prediction")
        if self.status == "failed" and not self.failure_reason:
            raise ValueError("a failed outcome needs a reason")

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "status": self.status,
            "predicted_class_index": self.predicted_class_index,
            "predicted_class_name": self.predicted_class_name,
            "original_confidence": self.original_confidence,
            "gt_class": self.gt_class,
            "records": [r.to_dict() for r in self.records],
            "discarded": [d.to_dict() for d in self.discarded],
            "failure_reason": self.failure_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageOutcome":
        return cls(
            image_id=d["image_id"],
            status=d["status"],
            predicted_class_index=d.get("predicted_class_index"),
            predicted_class_name=d.get("predicted_class_name"),
            original_confidence=d.get("original_confidence"),
            gt_class=d.get("gt_class"),
            records=tuple(EvidenceRecord.from_dict(r) for r in d.get("records", [])),
            discarded=tuple(DiscardedConcept.from_dict(x) for x in d.get("discarded", [])),
            failure_reason=d.get("failure_reason", ""),
        )


@dataclass(frozen=True)
class RunCounters:
    images_total: int = 0
    images_ok: int = 0
    images_failed: int = 0
    proposed_raw: int = 0  # proposals as returned by the backend
    proposed: int = 0  # unique concepts actually attempted (after dedup)
    grounded: int = 0
    grounding_failures: int = 0
    area_excluded: int = 0
    edited: int = 0
    scored: int = 0

    def __post_init__(self):
        if self.grounded + self.grounding_failures != self.proposed:
            raise ValueError(
                "counter invariant broken: grounded + grounding_failures "
                f"({self.grounded} + {self.grounding_failures}) != proposed "
                f"({self.proposed})"
            )
        if self.images_ok + self.images_failed != self.images_total:
            raise ValueError("image counters do not add up")

    def __add__(self, other: "RunCounters") -> "RunCounters":
        return RunCounters(
            **{
                name: getattr(self, name) + getattr(other, name)
                for name in self.__dataclass_fields__
            }
        )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "RunCounters":
        return cls(**{name: d[name] for name in cls.__dataclass_fields__})


RUN_MANIFEST_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunResult:
    run_id: str
    config: RunConfig
    outcomes: tuple[ImageOutcome, ...]
    counters: RunCounters
    degraded: bool = False

    @property
    def records(self) -> tuple[EvidenceRecord, ...]:
        return tuple(r for outcome in self.outcomes for r in outcome.records)

    def outcome(self, image_id: str) -> ImageOutcome:
        for o in self.outcomes:
            if o.image_id == image_id:
                return o
        raise KeyError(image_id)

    def to_dict(self) -> dict:
        return {
            "schema_version": RUN_MANIFEST_SCHEMA_VERSION,
            "run_id": self.run_id,
            "config": self.config.to_dict(),
            "formulas": {
                "pct_logit_drop": PCT_LOGIT_DROP_FORMULA,
                "normalized_importance": NORMALIZED_IMPORTANCE_FORMULA,
            },
            "outcomes": [o.to_dict() for o in self.outcomes],
            "counters": self.counters.to_dict(),
            "degraded": self.degraded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(
            run_id=d["run_id"],
            config=RunConfig.from_dict(d["config"]),
            outcomes=tuple(ImageOutcome.from_dict(o) for o in d["outcomes"]),
            counters=RunCounters.from_dict(d["counters"]),
            degraded=d.get("degraded", False),
        )


def load_run_result(run_dir: Union[str, Path]) -> RunResult:
    return RunResult.from_dict(load_json(Path(run_dir) / "manifest.json"))


# --- per-image pipeline ----------------------------------------------------


def _dedup_concepts(
    raw: Sequence[str],
) -> tuple[list[ConceptLabel], list[DiscardedConcept]]:
    """Normalize and keep the first of each normalized text, in order."""
    kept: list[ConceptLabel] = []
    discarded: list[DiscardedConcept] = []
    seen: set[str] = set()
    for text in raw:
        try:
            concept = normalize_concept(text)
        except RejectedConceptError as exc:
            discarded.append(
                DiscardedConcept(str(text), "", "empty-concept", str(exc))
            )
            continue
        if concept.normalized_text in seen:
            logger.warning(
                "duplicate concept %r (normalizes to %r) dropped",
                text,
                concept.normalized_text,
            )
            discarded.append(
                DiscardedConcept(
                    str(text), concept.normalized_text, "duplicate",
                    "same normalized text proposed earlier",
                )
            )
            continue
        seen.add(concept.normalized_text)
        kept.append(concept)
    return kept, discarded


def apply_mask_policy(
    mask: BinaryMask, image: ImageRecord, policy: str
) -> BinaryMask:
    """Reconcile mask dimensions with the image per RunConfig policy."""
    if (mask.height, mask.width) == (image.height, image.width):
        return mask
    if policy == "nearest-resize":
        from PIL import Image

        resized = Image.fromarray(mask.to_uint8(), mode="L").resize(
            (image.width, image.height), Image.NEAREST
        )
        return BinaryMask.from_array(np.asarray(resized, dtype=np.uint8) != 0)
    raise ValueError(
        f"mask {mask.height}x{mask.width} does not match image "
        f"{image.height}x{image.width}"
    )


def run_image(
    image: ImageRecord,
    config: RunConfig,
    suite,
    store: Optional[RunStore] = None,
) -> tuple[ImageOutcome, RunCounters]:
    """Full intervention pass over one image. Never raises on backend
    trouble: classifier/proposer failures fail the image, anything
    per-concept discards just that concept."""
    try:
        original_sv: ScoreVector = suite.classify(image)
    except Exception as exc:
        outcome = ImageOutcome(
            image_id=image.image_id,
            status="failed",
            gt_class=image.gt_class,
            failure_reason=f"classification failed: {exc}",
        )
        return outcome, RunCounters(images_total=1, images_failed=1)

    top = original_sv.argmax_index()
    top_name = original_sv.class_names[top]
    s = original_sv.score_for(top)

    try:
        proposals = suite.propose_concepts(image)
    except Exception as exc:
        outcome = ImageOutcome(
            image_id=image.image_id,
            status="failed",
            gt_class=image.gt_class,
            failure_reason=f"concept proposal failed: {exc}",
        )
        return outcome, RunCounters(images_total=1, images_failed=1)

    concepts, discarded = _dedup_concepts(proposals)
    if store is not None:
        store.save_original(image)

    clamp = config.logit_clamp
    records: list[EvidenceRecord] = []
    n_grounded = n_ground_failed = n_area_excluded = n_edited = n_scored = 0

    for concept in concepts:
        try:
            mask = suite.ground_concept(image, concept)
        except GroundingFailure as exc:
            n_ground_failed += 1
            discarded.append(
                DiscardedConcept(
                    concept.raw_text, concept.normalized_text,
                    "grounding-failure", str(exc),
                )
            )
            continue
        except Exception as exc:
            n_ground_failed += 1
            discarded.append(
                DiscardedConcept(
                    concept.raw_text, concept.normalized_text,
                    "grounding-failure", f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        try:
            mask = apply_mask_policy(mask, image, config.mask_dim_mismatch_policy)
        except ValueError as exc:
            n_ground_failed += 1
            discarded.append(
                DiscardedConcept(
                    concept.raw_text, concept.normalized_text,
                    "dimension-mismatch", str(exc),
                )
            )
            continue
        n_grounded += 1

        ma = mask_area_pct(mask)
        if ma >= config.area_exclusion_pct:
            n_area_excluded += 1
            discarded.append(
                DiscardedConcept(
                    concept.raw_text, concept.normalized_text, "area-excluded",
                    f"mask covers {ma:.4f}% >= {config.area_exclusion_pct}%",
                )
            )
            continue

        eid = evidence_id(config.run_id, image.image_id, concept)
        mask_ref = f"{image.image_id}/{eid}.mask.png"
        edited_ref = f"{image.image_id}/{eid}.edited.png"

        try:
            edited_pixels = suite.remove_region(image, mask)
        except Exception as exc:
            discarded.append(
                DiscardedConcept(
                    concept.raw_text, concept.normalized_text, "edit-failure",
                    f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        n_edited += 1

        edited_image = ImageRecord(image_id=image.image_id, pixels=edited_pixels)
        try:
            edited_sv = suite.classify(edited_image)
            if edited_sv.class_names != original_sv.class_names:
                raise ValueError("class list changed between original and edited image")
        except Exception as exc:
            discarded.append(
                DiscardedConcept(
                    concept.raw_text, concept.normalized_text,
                    "classification-failure", f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        n_scored += 1

        s_i = edited_sv.score_for(top)  # same index as the original prediction
        record = EvidenceRecord(
            evidence_id=eid,
            image_id=image.image_id,
            concept=concept,
            mask_ref=mask_ref,
            edited_image_ref=edited_ref,
            predicted_class_index=top,
            predicted_class_name=top_name,
            original_confidence=s,
            post_confidence=s_i,
            contribution=s - s_i,
            mask_area_pct=ma,
            confidence_drop_pct=confidence_drop_pct(s, s_i, config.epsilon),
            logit_delta=logit_delta(s, s_i, clamp),
            pct_logit_drop=pct_logit_drop(s, s_i, config.epsilon, clamp),
        )
        records.append(record)
        if store is not None:
            store.save_mask(image.image_id, eid, mask)
            store.save_edited(image.image_id, eid, edited_pixels)

    records.sort(key=lambda r: r.concept.normalized_text)
    outcome = ImageOutcome(
        image_id=image.image_id,
        status="ok",
        predicted_class_index=top,
        predicted_class_name=top_name,
        original_confidence=s,
        gt_class=image.gt_class,
        records=tuple(records),
        discarded=tuple(discarded),
    )
    counters = RunCounters(
        images_total=1,
        images_ok=1,
        proposed_raw=len(proposals),
        proposed=len(concepts),
        grounded=n_grounded,
        grounding_failures=n_ground_failed,
        area_excluded=n_area_excluded,
        edited=n_edited,
        scored=n_scored,
    )
    return outcome, counters


def run_dataset(
    manifest: Union[str, Path, DatasetManifest],
    config: RunConfig,
    suite,
    output_root: Optional[Union[str, Path]] = None,
    workers: int = 1,
) -> RunResult:
    """Run every manifest image through the pipeline.

    ``output_root`` is the parent for ``runs/<run_id>/`` artifacts; omit it
    for an in-memory run. The outcome list is sorted by image_id and each
    image's records by concept text, so results are byte-identical for any
    worker count. A run where more than half the images failed is marked
    degraded.
    """
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(Path(manifest))
    if workers < 1:
        raise ValueError("workers must be >= 1")
    store = None
    if output_root is not None:
        store = RunStore(Path(output_root) / config.run_id)

    def work(entry) -> tuple[ImageOutcome, RunCounters]:
        try:
            image = manifest.load_image(entry)
        except Exception as exc:
            outcome = ImageOutcome(
                image_id=entry.image_id,
                status="failed",
                gt_class=entry.gt_class,
                failure_reason=f"image load failed: {exc}",
            )
            return outcome, RunCounters(images_total=1, images_failed=1)
        return run_image(image, config, suite, store)

    if workers == 1:
        results = [work(entry) for entry in manifest.entries]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, manifest.entries))

    results.sort(key=lambda pair: pair[0].image_id)
    outcomes = tuple(outcome for outcome, _ in results)
    counters = RunCounters()
    for _, c in results:
        counters = counters + c
    degraded = counters.images_failed > 0.5 * counters.images_total
    result = RunResult(
        run_id=config.run_id,
        config=config,
        outcomes=outcomes,
        counters=counters,
        degraded=degraded,
    )
    if store is not None:
        dump_json(result.to_dict(), store.manifest_path)
    return result


# --- estimator-style front door -------------------------------------------


class ConceptInterventionExplainer(BaseEstimator):
    """Estimator facade over the pipeline: ``fit`` runs the dataset, after
    which per-image aggregates and predictions are available.

    Parameters mirror RunConfig; ``suite`` is any operator backend. Follows
    the usual conventions (get_params/set_params work, fitted state ends in
    trailing-underscore attributes).
    """

    def __init__(
        self,
        suite=None,
        run_id: str = "run",
        epsilon: float = 1e-8,
        area_exclusion_pct: float = 99.0,
        mask_dim_mismatch_policy: str = "error",
        rng_seed: int = 0,
        workers: int = 1,
        output_root: Optional[str] = None,
    ):
        self.suite = suite
        self.run_id = run_id
        self.epsilon = epsilon
        self.area_exclusion_pct = area_exclusion_pct
        self.mask_dim_mismatch_policy = mask_dim_mismatch_policy
        self.rng_seed = rng_seed
        self.workers = workers
        self.output_root = output_root

    def _config(self) -> RunConfig:
        return RunConfig(
            run_id=self.run_id,
            epsilon=self.epsilon,
            area_exclusion_pct=self.area_exclusion_pct,
            mask_dim_mismatch_policy=self.mask_dim_mismatch_policy,
            rng_seed=self.rng_seed,
        )

    def fit(self, X, y=None) -> "ConceptInterventionExplainer":
        """X: dataset manifest path or DatasetManifest."""
        if self.suite is None:
            raise ValueError("an operator suite is required to fit")
        self.run_result_ = run_dataset(
            X,
            self._config(),
            self.suite,
            output_root=self.output_root,
            workers=self.workers,
        )
        return self

    def _ok_outcomes(self) -> list[ImageOutcome]:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "run_result_")
        return [o for o in self.run_result_.outcomes if o.status == "ok"]

    def transform(self, X=None) -> np.ndarray:
        """Per-image aggregate features [adp, mdp, mad, n_records]; zero
        rows for images without evidence. Row order matches image_id order."""
        rows = []
        for outcome in self._ok_outcomes():
            if outcome.records:
                agg = aggregate_image(outcome.records)
                rows.append([agg.adp, agg.mdp, agg.mad, float(agg.n_records)])
            else:
                rows.append([0.0, 0.0, 0.0, 0.0])
        return np.asarray(rows, dtype=np.float64)

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)

    def predict(self, X=None) -> np.ndarray:
        """Predicted class name per successfully processed image."""
        return np.asarray(
            [o.predicted_class_name for o in self._ok_outcomes()], dtype=object
        )
