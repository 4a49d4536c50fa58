"""Fixture recorder: saves every served reply in the content-addressed
directory layout that the primary engine's fixture backend replays.

    <root>/<image_id>/propose.json                 {"concepts": [...]}
    <root>/<image_id>/ground/<key>.mask.png        key = sha16(concept text)
    <root>/<image_id>/ground/<key>.failure.json    {"concept": ..., "failure": true}
    <root>/<image_id>/edit/<key>.png               key = sha16(pixels : mask digest)
    <root>/<image_id>/classify/<digest>.json       digest = sha16(pixels)
    <root>/embed/<key>.json                        key = sha16(text)

The prompt template in force is stored alongside the fixtures for
provenance as ``prompt_template.txt``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .pngio import encode_mask, encode_rgb, mask_digest, pixels_digest, sha16


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


class FixtureRecorder:
    def __init__(self, root: str | Path, prompt_template: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "prompt_template.txt").write_text(
            prompt_template + "\n", encoding="utf-8"
        )

    def _image_dir(self, image_id: str) -> Path:
        return self.root / image_id

    def record_propose(self, image_id: str, concepts: Sequence[str]) -> None:
        _dump_json(
            {"concepts": list(concepts)}, self._image_dir(image_id) / "propose.json"
        )

    def record_ground(
        self, image_id: str, concept: str, mask_bits: np.ndarray
    ) -> None:
        path = (
            self._image_dir(image_id) / "ground" / f"{sha16(concept)}.mask.png"
        )
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_mask(mask_bits))

    def record_ground_failure(self, image_id: str, concept: str) -> None:
        _dump_json(
            {"concept": concept, "failure": True},
            self._image_dir(image_id) / "ground" / f"{sha16(concept)}.failure.json",
        )

    def record_edit(
        self,
        image_id: str,
        original: np.ndarray,
        mask_bits: np.ndarray,
        edited: np.ndarray,
    ) -> None:
        key = sha16(f"{pixels_digest(original)}:{mask_digest(mask_bits)}")
        path = self._image_dir(image_id) / "edit" / f"{key}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_rgb(edited))

    def record_classify(
        self,
        image_id: str,
        pixels: np.ndarray,
        class_names: Sequence[str],
        scores: Sequence[float],
    ) -> None:
        _dump_json(
            {"class_names": list(class_names), "scores": [float(v) for v in scores]},
            self._image_dir(image_id)
            / "classify"
            / f"{pixels_digest(pixels)}.json",
        )

    def record_embed(self, text: str, values: Sequence[float]) -> None:
        _dump_json(
            {"text": text, "values": [float(v) for v in values]},
            self.root / "embed" / f"{sha16(text)}.json",
        )
