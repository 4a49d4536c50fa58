"""Wire-format bridge between JSON requests and an OperatorSuite.

One dispatcher serves both transports: the child-process server reads JSON
lines tagged with ``op``, the HTTP server takes the op from the URL path.
Images and masks travel as base64 PNG (bit-exact round trip).
"""

from __future__ import annotations

import base64
from typing import Mapping

import numpy as np

from ..errors import GroundingFailure
from ..io import (
    decode_png_mask,
    decode_png_rgb,
    encode_png_mask,
    encode_png_rgb,
)
from ..types import BinaryMask, ImageRecord, normalize_concept
from .base import OperatorSuite

WIRE_OPS = ("propose", "ground", "edit", "classify", "embed")


def pixels_to_b64(pixels: np.ndarray) -> str:
    return base64.b64encode(encode_png_rgb(pixels)).decode("ascii")


def pixels_from_b64(data: str) -> np.ndarray:
    return decode_png_rgb(base64.b64decode(data))


def mask_to_b64(mask: BinaryMask) -> str:
    return base64.b64encode(encode_png_mask(mask)).decode("ascii")


def mask_from_b64(data: str) -> BinaryMask:
    return decode_png_mask(base64.b64decode(data))


def _image_from_request(body: Mapping) -> ImageRecord:
    if "image_png_b64" not in body:
        raise ValueError("request is missing image_png_b64")
    return ImageRecord(
        image_id=str(body.get("image_id", "wire")),
        pixels=pixels_from_b64(body["image_png_b64"]),
    )


def dispatch_request(suite: OperatorSuite, op: str, body: Mapping) -> dict:
    """Serve one request against ``suite``; raises on malformed input so the
    transport layer can map the failure to its own error envelope."""
    if op == "propose":
        return {"concepts": list(suite.propose_concepts(_image_from_request(body)))}
    if op == "ground":
        image = _image_from_request(body)
        concept = normalize_concept(str(body["concept"]))
        try:
            mask = suite.ground_concept(image, concept)
        except GroundingFailure:
            return {"failure": True}
        return {"mask_png_b64": mask_to_b64(mask)}
    if op == "edit":
        image = _image_from_request(body)
        mask = mask_from_b64(body["mask_png_b64"])
        return {"image_png_b64": pixels_to_b64(suite.remove_region(image, mask))}
    if op == "classify":
        sv = suite.classify(_image_from_request(body))
        return {
            "class_names": list(sv.class_names),
            "scores": [float(v) for v in sv.scores],
        }
    if op == "embed":
        values = suite.embed_text(str(body["text"]))
        return {"values": [float(v) for v in values]}
    raise ValueError(f"unknown op {op!r}; expected one of {WIRE_OPS}")
