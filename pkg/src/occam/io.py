"""PNG codecs, dataset manifests, and the on-disk run artifact layout.

Images are 8-bit RGB PNG. Masks are 8-bit single-channel PNG where 0 is
background and any nonzero value is foreground.
"""

from __future__ import annotations

import io as _io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from PIL import Image

from .types import BinaryMask, ImageRecord
from .validation import check_pixels

MANIFEST_SCHEMA_VERSION = 1


# --- PNG codecs -----------------------------------------------------------


def encode_png_rgb(pixels: np.ndarray) -> bytes:
    arr = check_pixels(pixels)
    buf = _io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_rgb(data: bytes) -> np.ndarray:
    with Image.open(_io.BytesIO(data)) as im:
        return check_pixels(np.asarray(im.convert("RGB"), dtype=np.uint8))


def encode_png_mask(mask: BinaryMask) -> bytes:
    buf = _io.BytesIO()
    Image.fromarray(mask.to_uint8(), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_mask(data: bytes) -> BinaryMask:
    with Image.open(_io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    return BinaryMask.from_array(arr != 0)


def write_png_rgb(path: Path, pixels: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_png_rgb(pixels))


def read_png_rgb(path: Path) -> np.ndarray:
    return decode_png_rgb(Path(path).read_bytes())


def write_png_mask(path: Path, mask: BinaryMask) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_png_mask(mask))


def read_png_mask(path: Path) -> BinaryMask:
    return decode_png_mask(Path(path).read_bytes())


def pixels_digest(pixels: np.ndarray) -> str:
    """Content hash of raw pixel data, used to key recorded backend replies."""
    import hashlib

    arr = np.ascontiguousarray(pixels)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()[:16]


# --- deterministic JSON ---------------------------------------------------


def dump_json(obj, path: Path) -> None:
    """Byte-deterministic JSON: sorted keys, fixed layout, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj), encoding="utf-8")


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_json(path: Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# --- dataset manifest -----------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_path: str
    gt_class: Optional[str] = None
    gt_masks: tuple[tuple[str, str], ...] = ()  # (label, mask_path)


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed dataset manifest; paths are resolved against ``base_dir``."""

    base_dir: Path
    entries: tuple[ManifestEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def entry(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(image_id)

    def load_image(self, entry: ManifestEntry) -> ImageRecord:
        pixels = read_png_rgb(self.base_dir / entry.image_path)
        gt_masks = None
        if entry.gt_masks:
            gt_masks = {
                label: read_png_mask(self.base_dir / mask_path)
                for label, mask_path in entry.gt_masks
            }
        return ImageRecord(
            image_id=entry.image_id,
            pixels=pixels,
            gt_masks=gt_masks,
            gt_class=entry.gt_class,
        )


def load_manifest(path: Path) -> DatasetManifest:
    path = Path(path)
    doc = load_json(path)
    if not isinstance(doc, dict) or "images" not in doc:
        raise ValueError(f"manifest {path} must be an object with an 'images' list")
    entries = []
    seen = set()
    for item in doc["images"]:
        image_id = item["image_id"]
        if image_id in seen:
            raise ValueError(f"duplicate image_id {image_id!r} in manifest {path}")
        seen.add(image_id)
        gt_masks = tuple(
            (m["label"], m["mask_path"]) for m in item.get("gt_masks", [])
        )
        entries.append(
            ManifestEntry(
                image_id=image_id,
                image_path=item["image_path"],
                gt_class=item.get("gt_class"),
                gt_masks=gt_masks,
            )
        )
    return DatasetManifest(base_dir=path.parent, entries=tuple(entries))


def save_manifest(path: Path, entries: list[dict]) -> None:
    dump_json({"schema_version": MANIFEST_SCHEMA_VERSION, "images": entries}, path)


# --- run artifact layout --------------------------------------------------


class RunStore:
    """Artifact layout of one run:

    runs/<run_id>/manifest.json
    runs/<run_id>/<image_id>/original.png
    runs/<run_id>/<image_id>/<evidence_id>.mask.png
    runs/<run_id>/<image_id>/<evidence_id>.edited.png
    """

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / "manifest.json"

    def _image_dir(self, image_id: str) -> Path:
        d = self.run_dir / image_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def save_original(self, image: ImageRecord) -> str:
        rel = f"{image.image_id}/original.png"
        write_png_rgb(self._image_dir(image.image_id) / "original.png", image.pixels)
        return rel

    def save_mask(self, image_id: str, evidence_id: str, mask: BinaryMask) -> str:
        rel = f"{image_id}/{evidence_id}.mask.png"
        write_png_mask(self._image_dir(image_id) / f"{evidence_id}.mask.png", mask)
        return rel

    def save_edited(self, image_id: str, evidence_id: str, pixels: np.ndarray) -> str:
        rel = f"{image_id}/{evidence_id}.edited.png"
        write_png_rgb(self._image_dir(image_id) / f"{evidence_id}.edited.png", pixels)
        return rel

    def load_mask(self, ref: str) -> BinaryMask:
        return read_png_mask(self.run_dir / ref)

    def load_image(self, ref: str) -> np.ndarray:
        return read_png_rgb(self.run_dir / ref)
