"""Causal-pruning, localization, and alignment metrics.

All functions are pure. Scalar conventions: probabilities in [0,1], mask
areas and drop percentages in [0,100], localization scores in [0,1]. The
relative log-odds drop and the size-normalized importance are artifact
definitions (no canonical formula exists); both carry a formula-version tag
that run manifests record so alternatives can coexist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import UndefinedAggregateError, UndefinedScoreError
from .types import BinaryMask, ConceptLabel, EvidenceRecord
from .validation import check_activation_values, check_probability

_trapezoid = getattr(np, "trapezoid", None) or np.trapz  # numpy 2.x rename

DEFAULT_EPSILON = 1e-8
DEFAULT_LOGIT_CLAMP = (1e-6, 1.0 - 1e-6)
DEFAULT_AREA_FLOOR_PCT = 0.5

#: Formula-version tags recorded in run manifests.
PCT_LOGIT_DROP_FORMULA = "pct-logit-drop/1"
NORMALIZED_IMPORTANCE_FORMULA = "normalized-importance/1"


@dataclass(frozen=True, eq=False)
class ActivationMap:
    """Dense H x W real-valued map (higher = more salient)."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", check_activation_values(self.values))

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class ImageAggregate:
    """Per-image summary of all its evidence records."""

    adp: float
    mdp: float
    mad: float
    n_records: int

    def __post_init__(self):
        if self.n_records < 1:
            raise ValueError("aggregate needs at least one record")
        if not (0.0 <= self.adp <= self.mdp <= 100.0):
            raise ValueError(f"need 0 <= adp <= mdp <= 100, got {self.adp}, {self.mdp}")
        if self.mad < 0.0:
            raise ValueError("mad must be >= 0")


@dataclass(frozen=True)
class AlignmentPair:
    predicted_concept: ConceptLabel
    gt_label: str
    similarity: float

    def __post_init__(self):
        if not math.isfinite(self.similarity):
            raise ValueError("similarity must be finite")


# --- causal-pruning scalars ------------------------------------------------


def mask_area_pct(mask: BinaryMask) -> float:
    """Percent of the image the mask occupies."""
    return 100.0 * mask.positive_count / (mask.height * mask.width)


def confidence_drop_pct(s: float, s_i: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """100 * max(0, s - s_i) / (s + epsilon): how much of the original
    confidence the intervention erased, clamped at no-drop."""
    check_probability(s, "s")
    check_probability(s_i, "s_i")
    return 100.0 * max(0.0, s - s_i) / (s + epsilon)


def logit(p: float, clamp: tuple[float, float] = DEFAULT_LOGIT_CLAMP) -> float:
    """Log-odds with the argument clamped into ``clamp`` first."""
    lo, hi = clamp
    p = min(max(float(p), lo), hi)
    return math.log(p / (1.0 - p))


def logit_delta(
    s: float, s_i: float, clamp: tuple[float, float] = DEFAULT_LOGIT_CLAMP
) -> float:
    """Log-odds after minus log-odds before; negative when confidence fell."""
    check_probability(s, "s")
    check_probability(s_i, "s_i")
    return logit(s_i, clamp) - logit(s, clamp)


def pct_logit_drop(
    s: float,
    s_i: float,
    epsilon: float = DEFAULT_EPSILON,
    clamp: tuple[float, float] = DEFAULT_LOGIT_CLAMP,
) -> float:
    """Relative log-odds drop, 100 * max(0, l(s) - l(s_i)) / (|l(s)| + eps).

    Artifact definition (tag ``PCT_LOGIT_DROP_FORMULA``)."""
    check_probability(s, "s")
    check_probability(s_i, "s_i")
    ls = logit(s, clamp)
    lsi = logit(s_i, clamp)
    return 100.0 * max(0.0, ls - lsi) / (abs(ls) + epsilon)


def aggregate_image(records: Sequence[EvidenceRecord]) -> ImageAggregate:
    """ADP = mean drop, MDP = max drop, MAD = max |log-odds change|."""
    if not records:
        raise UndefinedAggregateError("cannot aggregate zero evidence records")
    cdps = [r.confidence_drop_pct for r in records]
    lds = [r.logit_delta for r in records]
    # fsum/max make every aggregate exactly permutation-invariant
    return ImageAggregate(
        adp=math.fsum(cdps) / len(cdps),
        mdp=max(cdps),
        mad=max(abs(v) for v in lds),
        n_records=len(records),
    )


# --- localization ----------------------------------------------------------


def mask_to_activation(mask: BinaryMask) -> ActivationMap:
    """Lift a binary mask verbatim: 1.0 inside, 0.0 outside."""
    return ActivationMap(values=mask.bits.astype(np.float64))


def _check_pair(amap: ActivationMap, gt: BinaryMask) -> None:
    if (amap.height, amap.width) != (gt.height, gt.width):
        raise ValueError(
            f"map {amap.height}x{amap.width} does not match "
            f"ground truth {gt.height}x{gt.width}"
        )


def epg(amap: ActivationMap, gt: BinaryMask) -> float:
    """Fraction of normalized activation energy inside the ground truth.

    The map is min-max normalized first; a constant map scores 0 by
    definition, as does a vanishing denominator."""
    _check_pair(amap, gt)
    values = amap.values
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return 0.0
    normalized = (values - lo) / (hi - lo)
    denom = math.fsum(normalized.ravel().tolist())
    if denom == 0.0:
        return 0.0
    inside = math.fsum(normalized[gt.bits].tolist())
    return inside / denom


_N_AXIS = np.arange(1, 101, dtype=np.float64)


@lru_cache(maxsize=256)
def _k_grid(total: int) -> np.ndarray:
    """Pixel counts for the 1..100 integer-percent thresholds (banker's
    rounding, matching numpy's rint)."""
    ks = np.rint(np.arange(1, 101) * total / 100.0).astype(np.int64)
    ks.setflags(write=False)
    return ks


@lru_cache(maxsize=4096)
def _baseline_aucs(total: int, m: int) -> tuple[float, float]:
    """(ideal, random) curve areas for a mask of ``m`` pixels out of ``total``."""
    ks = _k_grid(total)
    inter = np.minimum(ks, m)
    ideal = inter / (ks + m - inter)
    r = ks * m / total
    rand = r / (ks + m - r)
    return float(_trapezoid(ideal, _N_AXIS)), float(_trapezoid(rand, _N_AXIS))


def nra(amap: ActivationMap, gt: BinaryMask) -> float:
    """Threshold-sweep region alignment, normalized between an analytic
    random baseline (0) and the ideal ranking (1).

    For each n in 1..100 percent the top-k_n pixels are selected
    (k_n = round(n*HW/100); ties among equal activations break in
    row-major order) and IoU against the ground truth is computed; the
    trapezoidal area of that curve is rescaled by the random/ideal areas.
    """
    _check_pair(amap, gt)
    m = gt.positive_count
    total = gt.height * gt.width
    if m == 0:
        raise UndefinedScoreError("ground-truth mask has no positive pixels")
    auc_high, auc_low = _baseline_aucs(total, m)
    if auc_high == auc_low:
        raise UndefinedScoreError(
            "ideal and random baselines coincide (mask covers the whole image?)"
        )
    flat = amap.values.ravel()
    order = np.argsort(-flat, kind="stable")  # stable: ties keep row-major order
    hits = np.zeros(total + 1, dtype=np.int64)
    np.cumsum(gt.bits.ravel()[order].astype(np.int64), out=hits[1:])  # hits[k] = gt in top-k
    ks = _k_grid(total)
    inter = hits[ks]
    ious = inter / (ks + m - inter)
    auc = float(_trapezoid(ious, _N_AXIS))
    return (auc - auc_low) / (auc_high - auc_low)


def hit_rate(scores: Iterable[float]) -> float:
    """Fraction of localization scores strictly above 0.5."""
    values = [float(v) for v in scores]
    if not values:
        raise UndefinedAggregateError("hit rate over zero scores is undefined")
    return sum(1 for v in values if v > 0.5) / len(values)


# --- alignment and importance ---------------------------------------------


def align_concepts(
    predicted: Sequence[ConceptLabel],
    gt_label: str,
    embedder: Union[Callable[[str], np.ndarray], object],
    min_similarity: Optional[float] = None,
) -> Optional[AlignmentPair]:
    """Pick the predicted concept most cosine-similar to the ground-truth
    label (ties keep list order). With ``min_similarity`` set, a best match
    below the threshold yields None instead."""
    from .backends.embedding import cosine_similarity

    if not predicted:
        raise ValueError("no predicted concepts to align")
    embed = getattr(embedder, "embed_text", embedder)
    gt_vec = np.asarray(embed(str(gt_label)), dtype=np.float64)
    best: Optional[AlignmentPair] = None
    for concept in predicted:
        sim = cosine_similarity(
            np.asarray(embed(concept.normalized_text), dtype=np.float64), gt_vec
        )
        if best is None or sim > best.similarity:
            best = AlignmentPair(
                predicted_concept=concept, gt_label=str(gt_label), similarity=sim
            )
    assert best is not None
    if min_similarity is not None and best.similarity < min_similarity:
        return None
    return best


def importance_per_area(
    confidence_drop_pct: float,
    mask_area_pct: float,
    area_floor_pct: float = DEFAULT_AREA_FLOOR_PCT,
) -> float:
    """Confidence drop per unit occluded area: cdp / max(MA, floor).

    Artifact definition (tag ``NORMALIZED_IMPORTANCE_FORMULA``)."""
    if not area_floor_pct > 0:
        raise ValueError("area_floor_pct must be > 0")
    return confidence_drop_pct / max(mask_area_pct, area_floor_pct)


def normalized_importance(
    record: EvidenceRecord, area_floor_pct: float = DEFAULT_AREA_FLOOR_PCT
) -> float:
    """Size-normalized importance of one intervention record."""
    return importance_per_area(
        record.confidence_drop_pct, record.mask_area_pct, area_floor_pct
    )
