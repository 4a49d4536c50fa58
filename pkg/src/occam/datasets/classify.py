"""Closed-form classification of synthetic scenes, two independent routes.

Route one works on the scene descriptor (object list); route two works only
on rendered pixels, re-deriving the object list by exact color segmentation
and shape identification. Both routes sum identical weight x area-fraction
terms with ``math.fsum`` and share one softmax, so they agree bit-for-bit.
The descriptor route doubles as the closed-form oracle for contribution
scores under object removal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..errors import ClassificationError
from ..types import ScoreVector
from .scenes import (
    BACKGROUND,
    PALETTE,
    SceneDescriptor,
    footprint_area,
    shape_membership,
)


def softmax(logits: Sequence[float]) -> list[float]:
    """Numerically-stable softmax with an order-independent denominator."""
    z = [float(v) for v in logits]
    m = max(z)
    exps = [math.exp(v - m) for v in z]
    total = math.fsum(exps)
    return [e / total for e in exps]


def evidence_logits(
    items: Iterable[tuple[str, int]],
    class_names: Sequence[str],
    class_weights: Mapping[str, Mapping[str, float]],
    canvas_area: int,
) -> list[float]:
    """Per-class logit: fsum over objects of weight(class, descriptor) *
    (pixel area / canvas area). The fsum makes the total independent of
    object order, so both classification routes produce identical bits."""
    items = list(items)
    logits = []
    for cname in class_names:
        per_class = class_weights[cname]
        terms = []
        for descriptor, area in items:
            if descriptor not in per_class:
                raise ClassificationError(
                    f"no weight for descriptor {descriptor!r} under class {cname!r}"
                )
            terms.append(per_class[descriptor] * (area / canvas_area))
        logits.append(math.fsum(terms))
    return logits


def classify_descriptor(
    desc: SceneDescriptor, exclude: Iterable[str] = ()
) -> ScoreVector:
    """Classify straight from the object list, optionally pretending some
    objects (by descriptor text) were removed."""
    excluded = set(exclude)
    unknown = excluded - set(desc.descriptors)
    if unknown:
        raise ValueError(f"not in scene: {sorted(unknown)}")
    items = [
        (obj.descriptor_text, footprint_area(obj))
        for obj in desc.objects
        if obj.descriptor_text not in excluded
    ]
    logits = evidence_logits(
        items, desc.class_names, desc.class_weights, desc.height * desc.width
    )
    return ScoreVector(
        scores=np.asarray(softmax(logits), dtype=np.float64),
        class_names=tuple(desc.class_names),
    )


@dataclass(frozen=True)
class DetectedObject:
    """Object recovered from pixels alone."""

    shape: str
    color_name: str
    row: int  # bounding-box top-left
    col: int
    size: int
    area: int

    @property
    def descriptor_text(self) -> str:
        return f"{self.color_name} {self.shape}"


def _candidate_shapes(h: int, w: int) -> list[tuple[str, int]]:
    """Shape parametrizations whose bounding box is exactly h x w."""
    out: list[tuple[str, int]] = []
    if h == w and h % 2 == 1 and h >= 5:
        out.append(("circle", (h - 1) // 2))
    if h == w and h >= 2:
        out.append(("square", h))
    if w == 2 * h - 1 and h >= 2:
        out.append(("triangle", h))
    return out


def detect_objects(
    pixels: np.ndarray,
    palette: Mapping[str, tuple[int, int, int]] = PALETTE,
    background: tuple[int, int, int] = BACKGROUND,
) -> list[DetectedObject]:
    """Exact object recovery: segment by color, then identify each blob's
    shape by regenerating candidate footprints from the bounding box and
    comparing pixel-for-pixel. Raises ClassificationError on any color or
    blob this world cannot produce."""
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ClassificationError("expected uint8 RGB pixels")
    flat = arr.reshape(-1, 3)
    colors = np.unique(flat, axis=0)
    rgb_to_name = {tuple(int(v) for v in rgb): name for name, rgb in palette.items()}
    bg = tuple(int(v) for v in background)

    detections: list[DetectedObject] = []
    for rgb in colors:
        key = tuple(int(v) for v in rgb)
        if key == bg:
            continue
        if key not in rgb_to_name:
            raise ClassificationError(f"unrecognized color {key}")
        blob = np.all(arr == np.asarray(rgb, dtype=np.uint8), axis=2)
        rows = np.flatnonzero(blob.any(axis=1))
        cols = np.flatnonzero(blob.any(axis=0))
        r0, r1 = int(rows[0]), int(rows[-1])
        c0, c1 = int(cols[0]), int(cols[-1])
        crop = blob[r0 : r1 + 1, c0 : c1 + 1]
        h, w = crop.shape
        match: Optional[tuple[str, int]] = None
        for shape, size in _candidate_shapes(h, w):
            if np.array_equal(crop, shape_membership(shape, size)):
                match = (shape, size)
                break
        if match is None:
            raise ClassificationError(
                f"blob of color {rgb_to_name[key]!r} has no recognizable shape"
            )
        detections.append(
            DetectedObject(
                shape=match[0],
                color_name=rgb_to_name[key],
                row=r0,
                col=c0,
                size=match[1],
                area=int(crop.sum()),
            )
        )
    detections.sort(key=lambda d: (d.row, d.col))
    return detections


def classify_pixels(
    pixels: np.ndarray,
    class_names: Sequence[str],
    class_weights: Mapping[str, Mapping[str, float]],
    palette: Mapping[str, tuple[int, int, int]] = PALETTE,
    background: tuple[int, int, int] = BACKGROUND,
) -> ScoreVector:
    """Classify from pixels alone. An empty canvas scores exactly uniform."""
    arr = np.asarray(pixels)
    detections = detect_objects(arr, palette, background)
    items = [(d.descriptor_text, d.area) for d in detections]
    logits = evidence_logits(
        items, class_names, class_weights, arr.shape[0] * arr.shape[1]
    )
    return ScoreVector(
        scores=np.asarray(softmax(logits), dtype=np.float64),
        class_names=tuple(class_names),
    )


def oracle_contribution(desc: SceneDescriptor, descriptor_text: str) -> float:
    """Closed-form contribution of one object: confidence of the predicted
    class before removal minus confidence of that same class after."""
    if descriptor_text not in desc.descriptors:
        raise ValueError(f"descriptor {descriptor_text!r} not in scene")
    before = classify_descriptor(desc)
    top = before.argmax_index()
    after = classify_descriptor(desc, exclude={descriptor_text})
    return before.score_for(top) - after.score_for(top)
