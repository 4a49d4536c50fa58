"""Recorded-reply backends: byte-exact replay and a recording wrapper.

Fixture layout (all replies content-addressed, so edited images re-enter
``classify`` cleanly):

    <root>/<image_id>/propose.json                 {"concepts": [...]}
    <root>/<image_id>/ground/<key>.mask.png        key = sha16(concept text)
    <root>/<image_id>/ground/<key>.failure.json    {"concept": ..., "failure": true}
    <root>/<image_id>/edit/<key>.png               key = sha16(pixels : mask digest)
    <root>/<image_id>/classify/<digest>.json       digest = sha16(pixels)
    <root>/embed/<key>.json                        key = sha16(text)
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from ..errors import GroundingFailure, ProtocolError
from ..io import (
    dump_json,
    load_json,
    pixels_digest,
    read_png_mask,
    read_png_rgb,
    write_png_mask,
    write_png_rgb,
)
from ..types import BinaryMask, ConceptLabel, ImageRecord, ScoreVector
from .base import OperatorSuite


def _sha16(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def mask_digest(mask: BinaryMask) -> str:
    h = hashlib.sha256()
    h.update(str(mask.bits.shape).encode())
    h.update(np.packbits(mask.bits).tobytes())
    return h.hexdigest()[:16]


def _edit_key(image: ImageRecord, mask: BinaryMask) -> str:
    return _sha16(f"{pixels_digest(image.pixels)}:{mask_digest(mask)}")


class FixtureSuite(OperatorSuite):
    """Pure replay of recorded replies; never computes anything itself."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise ProtocolError(f"fixture root {self.root} is not a directory")

    def _image_dir(self, image: ImageRecord) -> Path:
        return self.root / image.image_id

    def propose_concepts(self, image: ImageRecord) -> list[str]:
        path = self._image_dir(image) / "propose.json"
        if not path.is_file():
            raise ProtocolError(f"no recorded proposal for image {image.image_id!r}")
        doc = load_json(path)
        concepts = doc.get("concepts")
        if not isinstance(concepts, list) or not all(isinstance(c, str) for c in concepts):
            raise ProtocolError(f"malformed proposal fixture {path}")
        return list(concepts)

    def ground_concept(self, image: ImageRecord, concept: ConceptLabel) -> BinaryMask:
        base = self._image_dir(image) / "ground"
        key = _sha16(concept.normalized_text)
        mask_path = base / f"{key}.mask.png"
        failure_path = base / f"{key}.failure.json"
        if failure_path.is_file():
            raise GroundingFailure(
                f"recorded grounding failure for {concept.normalized_text!r}"
            )
        if not mask_path.is_file():
            raise ProtocolError(
                f"no recorded grounding for {concept.normalized_text!r} "
                f"on image {image.image_id!r}"
            )
        mask = read_png_mask(mask_path)
        if mask.positive_count == 0:
            raise GroundingFailure(
                f"recorded mask for {concept.normalized_text!r} has no positive pixels"
            )
        return mask

    def remove_region(self, image: ImageRecord, mask: BinaryMask) -> np.ndarray:
        if mask.positive_count == 0:
            raise ValueError("refusing to edit with an empty mask")
        path = self._image_dir(image) / "edit" / f"{_edit_key(image, mask)}.png"
        if not path.is_file():
            raise ProtocolError(f"no recorded edit for image {image.image_id!r}")
        return read_png_rgb(path)

    def classify(self, image: ImageRecord) -> ScoreVector:
        digest = pixels_digest(image.pixels)
        path = self._image_dir(image) / "classify" / f"{digest}.json"
        if not path.is_file():
            raise ProtocolError(
                f"no recorded classification for image {image.image_id!r} "
                f"(pixel digest {digest})"
            )
        doc = load_json(path)
        try:
            return ScoreVector(
                scores=np.asarray(doc["scores"], dtype=np.float64),
                class_names=tuple(doc["class_names"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed classification fixture {path}: {exc}") from exc

    def embed_text(self, text: str) -> np.ndarray:
        if not str(text):
            raise ValueError("cannot embed empty text")
        path = self.root / "embed" / f"{_sha16(text)}.json"
        if not path.is_file():
            raise ProtocolError(f"no recorded embedding for {text!r}")
        doc = load_json(path)
        values = np.asarray(doc.get("values", []), dtype=np.float64)
        if values.ndim != 1 or values.size < 2 or not np.isfinite(values).all():
            raise ProtocolError(f"malformed embedding fixture {path}")
        return values


class RecordingSuite(OperatorSuite):
    """Delegates to an inner backend and records every reply in the fixture
    layout, so a later FixtureSuite run replays this one byte-for-byte."""

    def __init__(self, inner: OperatorSuite, root: str | Path):
        self.inner = inner
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def propose_concepts(self, image: ImageRecord) -> list[str]:
        concepts = self.inner.propose_concepts(image)
        dump_json({"concepts": list(concepts)}, self.root / image.image_id / "propose.json")
        return concepts

    def ground_concept(self, image: ImageRecord, concept: ConceptLabel) -> BinaryMask:
        base = self.root / image.image_id / "ground"
        key = _sha16(concept.normalized_text)
        try:
            mask = self.inner.ground_concept(image, concept)
        except GroundingFailure:
            dump_json(
                {"concept": concept.normalized_text, "failure": True},
                base / f"{key}.failure.json",
            )
            raise
        write_png_mask(base / f"{key}.mask.png", mask)
        return mask

    def remove_region(self, image: ImageRecord, mask: BinaryMask) -> np.ndarray:
        edited = self.inner.remove_region(image, mask)
        write_png_rgb(
            self.root / image.image_id / "edit" / f"{_edit_key(image, mask)}.png", edited
        )
        return edited

    def classify(self, image: ImageRecord) -> ScoreVector:
        sv = self.inner.classify(image)
        dump_json(
            {"class_names": list(sv.class_names), "scores": [float(v) for v in sv.scores]},
            self.root / image.image_id / "classify" / f"{pixels_digest(image.pixels)}.json",
        )
        return sv

    def embed_text(self, text: str) -> np.ndarray:
        values = self.inner.embed_text(text)
        dump_json(
            {"text": str(text), "values": [float(v) for v in values]},
            self.root / "embed" / f"{_sha16(text)}.json",
        )
        return values

    def close(self) -> None:
        self.inner.close()
