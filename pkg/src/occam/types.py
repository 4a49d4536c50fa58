"""Shared domain types: images, masks, concepts, score vectors, evidence,
run configuration. No model logic lives here.

All types are immutable after construction (arrays are frozen read-only) and
safe to share between worker threads.
"""

from __future__ import annotations

import hashlib
import string
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Optional

import numpy as np

from .errors import RejectedConceptError
from .validation import check_mask_bits, check_pixels, check_probability

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, annotation only
    from .backends.base import OperatorEndpoint

_TRIM_CHARS = string.punctuation + string.whitespace

#: Probability-sum slack accepted when building a ScoreVector.
SCORE_SUM_TOLERANCE = 1e-6


def normalize_concept(raw: str) -> "ConceptLabel":
    """Deterministically normalize free-form concept text.

    Lowercase, collapse internal whitespace, trim surrounding punctuation
    and whitespace. Idempotent. Raises :class:`RejectedConceptError` when
    nothing is left.
    """
    text = " ".join(str(raw).lower().split())
    text = text.strip(_TRIM_CHARS)
    if not text:
        raise RejectedConceptError(f"concept text {raw!r} is empty after normalization")
    return ConceptLabel(raw_text=str(raw), normalized_text=text)


def evidence_id(run_id: str, image_id: str, concept: "ConceptLabel") -> str:
    """Deterministic, collision-resistant id for one intervention.

    Hashes (run_id, image_id, normalized concept text) so re-runs and
    concept-case variations map to the same id.
    """
    for name, value in (("run_id", run_id), ("image_id", image_id)):
        if not value:
            raise ValueError(f"{name} must be non-empty")
    payload = "\x1f".join((run_id, image_id, concept.normalized_text))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ConceptLabel:
    """A free-form concept plus its canonical lowercase form.

    Concept identity throughout the package is ``normalized_text``.
    """

    raw_text: str
    normalized_text: str

    def __post_init__(self):
        if not self.normalized_text:
            raise RejectedConceptError("normalized_text must be non-empty")


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """H x W binary spatial support of a concept."""

    bits: np.ndarray  # bool, read-only

    def __post_init__(self):
        object.__setattr__(self, "bits", check_mask_bits(self.bits))

    @classmethod
    def from_array(cls, arr) -> "BinaryMask":
        return cls(bits=arr)

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def positive_count(self) -> int:
        return int(self.bits.sum())

    def to_uint8(self) -> np.ndarray:
        """0/255 single-channel image, the on-disk mask convention."""
        return np.where(self.bits, np.uint8(255), np.uint8(0))


@dataclass(frozen=True, eq=False)
class ImageRecord:
    """An image plus identity, dimensions and optional ground truth."""

    image_id: str
    pixels: np.ndarray  # uint8 H x W x 3, read-only
    gt_masks: Optional[Mapping[str, BinaryMask]] = None
    gt_class: Optional[str] = None

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        object.__setattr__(self, "pixels", check_pixels(self.pixels))
        if self.gt_masks is not None:
            for label, mask in self.gt_masks.items():
                if (mask.height, mask.width) != (self.height, self.width):
                    raise ValueError(
                        f"gt_mask {label!r} is {mask.height}x{mask.width}, "
                        f"image {self.image_id!r} is {self.height}x{self.width}"
                    )

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Probability vector over a fixed class list."""

    scores: np.ndarray  # float64, length C, read-only
    class_names: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"scores must be 1-dimensional, got shape {arr.shape}")
        names = tuple(str(n) for n in self.class_names)
        if len(names) != arr.shape[0]:
            raise ValueError(
                f"{len(names)} class names for {arr.shape[0]} scores"
            )
        if arr.shape[0] < 2:
            raise ValueError("a score vector needs at least 2 classes")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("scores must lie in [0, 1]")
        total = float(arr.sum())
        if abs(total - 1.0) > SCORE_SUM_TOLERANCE:
            raise ValueError(f"scores sum to {total}, not 1 within {SCORE_SUM_TOLERANCE}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        object.__setattr__(self, "class_names", names)

    @property
    def n_classes(self) -> int:
        return int(self.scores.shape[0])

    def argmax_index(self) -> int:
        """Index of the top class; ties resolve to the lowest index."""
        return int(np.argmax(self.scores))

    def score_for(self, index: int) -> float:
        return float(self.scores[index])


@dataclass(frozen=True)
class EvidenceRecord:
    """Full trace of one intervention: concept, artifacts, scores, metrics."""

    evidence_id: str
    image_id: str
    concept: ConceptLabel
    mask_ref: str
    edited_image_ref: str
    predicted_class_index: int
    predicted_class_name: str
    original_confidence: float  # s, for the predicted class
    post_confidence: float  # s_i, same class index after removal
    contribution: float  # s - s_i
    mask_area_pct: float
    confidence_drop_pct: float
    logit_delta: float
    pct_logit_drop: float

    def __post_init__(self):
        check_probability(self.original_confidence, "original_confidence")
        check_probability(self.post_confidence, "post_confidence")
        if self.contribution != self.original_confidence - self.post_confidence:
            raise ValueError(
                "contribution must equal original_confidence - post_confidence exactly"
            )
        if not (0.0 <= self.mask_area_pct <= 100.0):
            raise ValueError(f"mask_area_pct out of range: {self.mask_area_pct}")
        if not (0.0 <= self.confidence_drop_pct <= 100.0):
            raise ValueError(f"confidence_drop_pct out of range: {self.confidence_drop_pct}")
        if self.pct_logit_drop < 0.0:
            raise ValueError(f"pct_logit_drop must be >= 0, got {self.pct_logit_drop}")

    def to_dict(self) -> dict:
        return {
            "evidence_id": self.evidence_id,
            "image_id": self.image_id,
            "concept_raw": self.concept.raw_text,
            "concept": self.concept.normalized_text,
            "mask_ref": self.mask_ref,
            "edited_image_ref": self.edited_image_ref,
            "predicted_class": {
                "index": self.predicted_class_index,
                "name": self.predicted_class_name,
            },
            "original_confidence": self.original_confidence,
            "post_confidence": self.post_confidence,
            "contribution": self.contribution,
            "mask_area_pct": self.mask_area_pct,
            "confidence_drop_pct": self.confidence_drop_pct,
            "logit_delta": self.logit_delta,
            "pct_logit_drop": self.pct_logit_drop,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceRecord":
        return cls(
            evidence_id=d["evidence_id"],
            image_id=d["image_id"],
            concept=ConceptLabel(d["concept_raw"], d["concept"]),
            mask_ref=d["mask_ref"],
            edited_image_ref=d["edited_image_ref"],
            predicted_class_index=int(d["predicted_class"]["index"]),
            predicted_class_name=d["predicted_class"]["name"],
            original_confidence=d["original_confidence"],
            post_confidence=d["post_confidence"],
            contribution=d["contribution"],
            mask_area_pct=d["mask_area_pct"],
            confidence_drop_pct=d["confidence_drop_pct"],
            logit_delta=d["logit_delta"],
            pct_logit_drop=d["pct_logit_drop"],
        )


#: Allowed reactions to a grounding mask whose dimensions differ from the image.
MASK_DIM_POLICIES = ("error", "nearest-resize")


@dataclass(frozen=True)
class RunConfig:
    """Reproducible configuration for one pipeline run."""

    run_id: str
    epsilon: float = 1e-8
    logit_clamp: tuple[float, float] = (1e-6, 1.0 - 1e-6)
    area_exclusion_pct: float = 99.0
    mask_dim_mismatch_policy: str = "error"
    rng_seed: int = 0
    endpoints: Mapping[str, "OperatorEndpoint"] = field(default_factory=dict)

    def __post_init__(self):
        if not self.run_id:
            raise ValueError("run_id must be non-empty")
        if not (0.0 < self.epsilon < 1e-3):
            raise ValueError(f"epsilon must lie in (0, 1e-3), got {self.epsilon}")
        lo, hi = self.logit_clamp
        if not (0.0 < lo < hi < 1.0):
            raise ValueError(f"logit_clamp must satisfy 0 < lo < hi < 1, got {self.logit_clamp}")
        if not (0.0 < self.area_exclusion_pct <= 100.0):
            raise ValueError(
                f"area_exclusion_pct must lie in (0, 100], got {self.area_exclusion_pct}"
            )
        if self.mask_dim_mismatch_policy not in MASK_DIM_POLICIES:
            raise ValueError(
                f"mask_dim_mismatch_policy must be one of {MASK_DIM_POLICIES}, "
                f"got {self.mask_dim_mismatch_policy!r}"
            )
        object.__setattr__(self, "logit_clamp", (float(lo), float(hi)))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "epsilon": self.epsilon,
            "logit_clamp": list(self.logit_clamp),
            "area_exclusion_pct": self.area_exclusion_pct,
            "mask_dim_mismatch_policy": self.mask_dim_mismatch_policy,
            "rng_seed": self.rng_seed,
            "endpoints": {op: ep.to_dict() for op, ep in sorted(self.endpoints.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        from .backends.base import OperatorEndpoint

        return cls(
            run_id=d["run_id"],
            epsilon=d.get("epsilon", 1e-8),
            logit_clamp=tuple(d.get("logit_clamp", (1e-6, 1.0 - 1e-6))),
            area_exclusion_pct=d.get("area_exclusion_pct", 99.0),
            mask_dim_mismatch_policy=d.get("mask_dim_mismatch_policy", "error"),
            rng_seed=d.get("rng_seed", 0),
            endpoints={
                op: OperatorEndpoint.from_dict(ep)
                for op, ep in d.get("endpoints", {}).items()
            },
        )
