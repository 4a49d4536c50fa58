"""Operator backend over the synthetic shape world.

Purely content-based: every operation reads only the pixels it is given
(object recovery is exact), so the backend needs no per-image ground truth —
just the world description (class list, weights, palette, background).
"""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from ..datasets.classify import classify_pixels, detect_objects
from ..datasets.scenes import BACKGROUND, PALETTE, SceneObject, rasterize_object
from ..errors import GroundingFailure
from ..io import load_json
from ..types import BinaryMask, ConceptLabel, ImageRecord, ScoreVector
from .base import OperatorSuite
from .embedding import EMBEDDING_DIM, embed_tokens


class SyntheticSuite(OperatorSuite):
    """Proposer/grounder/editor/classifier/embedder for synthetic scenes."""

    def __init__(
        self,
        class_names,
        class_weights: Mapping[str, Mapping[str, float]],
        palette: Mapping[str, tuple[int, int, int]] = PALETTE,
        background: tuple[int, int, int] = BACKGROUND,
        embedding_dim: int = EMBEDDING_DIM,
    ):
        self.class_names = tuple(class_names)
        self.class_weights = {c: dict(w) for c, w in class_weights.items()}
        self.palette = {k: tuple(v) for k, v in palette.items()}
        self.background = tuple(background)
        self.embedding_dim = int(embedding_dim)

    @classmethod
    def from_world_file(
        cls, path: str, options: Optional[Mapping[str, object]] = None
    ) -> "SyntheticSuite":
        doc = load_json(path)
        options = options or {}
        return cls(
            class_names=doc["class_names"],
            class_weights=doc["class_weights"],
            palette={k: tuple(v) for k, v in doc.get("palette", PALETTE).items()},
            background=tuple(doc.get("background", BACKGROUND)),
            embedding_dim=int(options.get("embedding_dim", EMBEDDING_DIM)),
        )

    def _detect(self, image: ImageRecord):
        return detect_objects(image.pixels, self.palette, self.background)

    def propose_concepts(self, image: ImageRecord) -> list[str]:
        return [d.descriptor_text for d in self._detect(image)]

    def ground_concept(self, image: ImageRecord, concept: ConceptLabel) -> BinaryMask:
        for det in self._detect(image):
            if det.descriptor_text == concept.normalized_text:
                obj = SceneObject(
                    shape=det.shape, color_name=det.color_name,
                    row=det.row, col=det.col, size=det.size,
                )
                return BinaryMask.from_array(
                    rasterize_object(obj, image.height, image.width)
                )
        raise GroundingFailure(f"no object matches {concept.normalized_text!r}")

    def remove_region(self, image: ImageRecord, mask: BinaryMask) -> np.ndarray:
        if (mask.height, mask.width) != (image.height, image.width):
            raise ValueError(
                f"mask {mask.height}x{mask.width} does not fit image "
                f"{image.height}x{image.width}"
            )
        if mask.positive_count == 0:
            raise ValueError("refusing to edit with an empty mask")
        out = np.array(image.pixels, dtype=np.uint8, copy=True)
        out[mask.bits] = np.asarray(self.background, dtype=np.uint8)
        return out

    def classify(self, image: ImageRecord) -> ScoreVector:
        return classify_pixels(
            image.pixels, self.class_names, self.class_weights,
            self.palette, self.background,
        )

    def embed_text(self, text: str) -> np.ndarray:
        return embed_tokens(text, self.embedding_dim)
