"""PNG codecs and content digests matching the wire and fixture formats.

Images travel as RGB PNG, masks as 8-bit grayscale PNG where any nonzero
pixel is positive.  Digests are sha256 prefixes over the array shape plus
raw bytes, the scheme the fixture directory layout keys its files by.
"""

from __future__ import annotations

import base64
import hashlib
import io

import numpy as np
from PIL import Image


def encode_rgb(pixels: np.ndarray) -> bytes:
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected HxWx3 uint8 pixels, got shape {arr.shape}")
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_rgb(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"decoded image has shape {arr.shape}, expected HxWx3")
    return arr


def encode_mask(bits: np.ndarray) -> bytes:
    arr = np.asarray(bits, dtype=bool)
    if arr.ndim != 2:
        raise ValueError(f"expected HxW mask bits, got shape {arr.shape}")
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8) * 255, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_mask(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    return arr != 0


def b64_rgb(pixels: np.ndarray) -> str:
    return base64.b64encode(encode_rgb(pixels)).decode("ascii")


def rgb_b64(data: str) -> np.ndarray:
    return decode_rgb(base64.b64decode(data))


def b64_mask(bits: np.ndarray) -> str:
    return base64.b64encode(encode_mask(bits)).decode("ascii")


def mask_b64(data: str) -> np.ndarray:
    return decode_mask(base64.b64decode(data))


def sha16(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def pixels_digest(pixels: np.ndarray) -> str:
    arr = np.ascontiguousarray(np.asarray(pixels, dtype=np.uint8))
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()[:16]


def mask_digest(bits: np.ndarray) -> str:
    arr = np.asarray(bits, dtype=bool)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(np.packbits(arr).tobytes())
    return h.hexdigest()[:16]
