"""Deterministic synthetic scenes: flat-colored shapes on a plain background.

Scenes are exact by construction: the same integer membership test produces
the rendered pixels, the per-object footprint masks, and the object areas, so
removal (background fill) and re-classification agree bit-for-bit with
descriptor-level computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import GenerationError
from ..io import dump_json, load_json, save_manifest, write_png_mask, write_png_rgb
from ..types import BinaryMask, ImageRecord

#: Object fill colors; unique per scene so exact color segmentation is unambiguous.
PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (200, 30, 30),
    "green": (30, 160, 30),
    "blue": (40, 50, 210),
    "yellow": (230, 200, 20),
    "purple": (140, 30, 170),
    "orange": (240, 130, 20),
    "cyan": (20, 180, 180),
    "brown": (140, 90, 40),
}

BACKGROUND: tuple[int, int, int] = (240, 240, 240)

SHAPES: tuple[str, ...] = ("circle", "square", "triangle")

DEFAULT_CLASS_NAMES: tuple[str, ...] = ("class_a", "class_b", "class_c", "class_d")

WORLD_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SceneObject:
    """One shape. ``row``/``col`` anchor the bounding box top-left corner.

    circle: bounding box (2s+1) x (2s+1), radius s
    square: bounding box s x s
    triangle: s rows, base width 2s-1, apex centered on the top row
    """

    shape: str
    color_name: str
    row: int
    col: int
    size: int

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.color_name not in PALETTE:
            raise ValueError(f"unknown color {self.color_name!r}")
        if self.size < 2:
            raise ValueError("object size must be >= 2")

    @property
    def descriptor_text(self) -> str:
        return f"{self.color_name} {self.shape}"

    @property
    def color(self) -> tuple[int, int, int]:
        return PALETTE[self.color_name]

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(row, col, height, width) of the bounding box."""
        if self.shape == "circle":
            d = 2 * self.size + 1
            return (self.row, self.col, d, d)
        if self.shape == "square":
            return (self.row, self.col, self.size, self.size)
        return (self.row, self.col, self.size, 2 * self.size - 1)

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "color_name": self.color_name,
            "row": self.row,
            "col": self.col,
            "size": self.size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneObject":
        return cls(
            shape=d["shape"],
            color_name=d["color_name"],
            row=int(d["row"]),
            col=int(d["col"]),
            size=int(d["size"]),
        )


def shape_membership(shape: str, size: int) -> np.ndarray:
    """Exact boolean footprint of a shape inside its bounding box."""
    if shape == "circle":
        r = size
        yy, xx = np.ogrid[-r : r + 1, -r : r + 1]
        return (yy * yy + xx * xx) <= r * r
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "triangle":
        h = size
        rows = np.arange(h)[:, None]
        cols = np.arange(2 * h - 1)[None, :]
        return np.abs(cols - (h - 1)) <= rows
    raise ValueError(f"unknown shape {shape!r}")


def rasterize_object(obj: SceneObject, height: int, width: int) -> np.ndarray:
    """Full-canvas boolean footprint of one object."""
    r0, c0, h, w = obj.bbox
    if r0 < 0 or c0 < 0 or r0 + h > height or c0 + w > width:
        raise ValueError(f"object {obj.descriptor_text!r} exceeds canvas bounds")
    out = np.zeros((height, width), dtype=bool)
    out[r0 : r0 + h, c0 : c0 + w] = shape_membership(obj.shape, obj.size)
    return out


def footprint_area(obj: SceneObject) -> int:
    """Exact rasterized pixel count (triangle is s^2, others counted)."""
    return int(shape_membership(obj.shape, obj.size).sum())


@dataclass(frozen=True)
class SceneDescriptor:
    """Complete ground truth for one scene, including the classifier weights
    in force when it was generated."""

    seed: int
    height: int
    width: int
    background: tuple[int, int, int]
    objects: tuple[SceneObject, ...]
    class_names: tuple[str, ...]
    class_weights: Mapping[str, Mapping[str, float]]  # class -> descriptor -> weight

    def __post_init__(self):
        descriptors = [o.descriptor_text for o in self.objects]
        if len(set(descriptors)) != len(descriptors):
            raise ValueError("descriptor_text must be unique within a scene")
        colors = [o.color_name for o in self.objects]
        if len(set(colors)) != len(colors):
            raise ValueError("object colors must be unique within a scene")
        for obj in self.objects:
            r0, c0, h, w = obj.bbox
            if r0 < 0 or c0 < 0 or r0 + h > self.height or c0 + w > self.width:
                raise ValueError(f"object {obj.descriptor_text!r} exceeds canvas bounds")

    @property
    def descriptors(self) -> tuple[str, ...]:
        return tuple(o.descriptor_text for o in self.objects)

    def object_by_descriptor(self, descriptor_text: str) -> SceneObject:
        for obj in self.objects:
            if obj.descriptor_text == descriptor_text:
                return obj
        raise KeyError(descriptor_text)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "height": self.height,
            "width": self.width,
            "background": list(self.background),
            "objects": [o.to_dict() for o in self.objects],
            "class_names": list(self.class_names),
            "class_weights": {
                c: dict(sorted(ws.items())) for c, ws in sorted(self.class_weights.items())
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneDescriptor":
        return cls(
            seed=int(d["seed"]),
            height=int(d["height"]),
            width=int(d["width"]),
            background=tuple(d["background"]),
            objects=tuple(SceneObject.from_dict(o) for o in d["objects"]),
            class_names=tuple(d["class_names"]),
            class_weights={c: dict(ws) for c, ws in d["class_weights"].items()},
        )


@dataclass(frozen=True)
class GenerationParams:
    height: int = 64
    width: int = 64
    min_objects: int = 2
    max_objects: int = 4
    min_size: int = 4
    max_size: int = 8
    n_classes: int = 4
    weight_scale: float = 6.0
    max_attempts: int = 200

    def __post_init__(self):
        if self.height < 8 or self.width < 8:
            raise ValueError("canvas must be at least 8x8")
        if not (0 <= self.min_objects <= self.max_objects):
            raise ValueError("need 0 <= min_objects <= max_objects")
        if self.max_objects > len(PALETTE):
            raise ValueError(f"at most {len(PALETTE)} objects (one color each)")
        if not (2 <= self.min_size <= self.max_size):
            raise ValueError("need 2 <= min_size <= max_size")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")


def make_class_weights(
    seed: int, n_classes: int = 4, weight_scale: float = 6.0
) -> tuple[tuple[str, ...], dict[str, dict[str, float]]]:
    """Non-negative per-(class, descriptor) evidence weights over the full
    color x shape grid, drawn deterministically from ``seed``."""
    rng = np.random.default_rng([int(seed), 1])
    class_names = tuple(
        DEFAULT_CLASS_NAMES[i] if i < len(DEFAULT_CLASS_NAMES) else f"class_{i}"
        for i in range(n_classes)
    )
    weights: dict[str, dict[str, float]] = {}
    for cname in class_names:
        per_class: dict[str, float] = {}
        for color in PALETTE:
            for shape in SHAPES:
                per_class[f"{color} {shape}"] = float(rng.uniform(0.0, weight_scale))
        weights[cname] = per_class
    return class_names, weights


def generate_scene(
    seed: int,
    params: GenerationParams = GenerationParams(),
    class_names: Optional[Sequence[str]] = None,
    class_weights: Optional[Mapping[str, Mapping[str, float]]] = None,
) -> SceneDescriptor:
    """Deterministic scene from ``seed``: unique-colored, non-overlapping
    shapes inside the canvas. Raises GenerationError if placement fails."""
    rng = np.random.default_rng([int(seed), 0])
    if (class_names is None) != (class_weights is None):
        raise ValueError("pass class_names and class_weights together or neither")
    if class_names is None:
        class_names, class_weights = make_class_weights(
            seed, params.n_classes, params.weight_scale
        )
    n_objects = int(rng.integers(params.min_objects, params.max_objects + 1))
    color_names = list(rng.choice(list(PALETTE), size=n_objects, replace=False))
    shapes = list(rng.choice(list(SHAPES), size=n_objects, replace=True))
    sizes = [int(s) for s in rng.integers(params.min_size, params.max_size + 1, n_objects)]

    occupied = np.zeros((params.height, params.width), dtype=bool)
    objects: list[SceneObject] = []
    for color, shape, size in zip(color_names, shapes, sizes):
        placed = False
        for _ in range(params.max_attempts):
            probe = SceneObject(shape=shape, color_name=str(color), row=0, col=0, size=size)
            _, _, h, w = probe.bbox
            if h > params.height or w > params.width:
                break
            row = int(rng.integers(0, params.height - h + 1))
            col = int(rng.integers(0, params.width - w + 1))
            obj = SceneObject(shape=shape, color_name=str(color), row=row, col=col, size=size)
            footprint = rasterize_object(obj, params.height, params.width)
            if not (footprint & occupied).any():
                occupied |= footprint
                objects.append(obj)
                placed = True
                break
        if not placed:
            raise GenerationError(
                f"could not place {shape} of size {size} after {params.max_attempts} attempts"
            )
    return SceneDescriptor(
        seed=int(seed),
        height=params.height,
        width=params.width,
        background=BACKGROUND,
        objects=tuple(objects),
        class_names=tuple(class_names),
        class_weights={c: dict(ws) for c, ws in class_weights.items()},
    )


def render_scene(desc: SceneDescriptor) -> np.ndarray:
    """Exact uint8 rendering; footprints are disjoint so paint order is moot."""
    pixels = np.empty((desc.height, desc.width, 3), dtype=np.uint8)
    pixels[:, :] = np.asarray(desc.background, dtype=np.uint8)
    for obj in desc.objects:
        footprint = rasterize_object(obj, desc.height, desc.width)
        pixels[footprint] = np.asarray(obj.color, dtype=np.uint8)
    return pixels


def object_mask(desc: SceneDescriptor, descriptor_text: str) -> BinaryMask:
    obj = desc.object_by_descriptor(descriptor_text)
    return BinaryMask.from_array(rasterize_object(obj, desc.height, desc.width))


def make_scene(
    seed: int,
    params: GenerationParams = GenerationParams(),
    image_id: Optional[str] = None,
    class_names: Optional[Sequence[str]] = None,
    class_weights: Optional[Mapping[str, Mapping[str, float]]] = None,
) -> tuple[SceneDescriptor, ImageRecord]:
    """Scene descriptor plus its rendered ImageRecord (with gt masks)."""
    desc = generate_scene(seed, params, class_names=class_names, class_weights=class_weights)
    from .classify import classify_descriptor  # late import, avoids cycle

    gt_class = None
    if desc.objects:
        sv = classify_descriptor(desc)
        gt_class = sv.class_names[sv.argmax_index()]
    record = ImageRecord(
        image_id=image_id or f"scene-{seed}",
        pixels=render_scene(desc),
        gt_masks={d: object_mask(desc, d) for d in desc.descriptors},
        gt_class=gt_class,
    )
    return desc, record


def write_scene_dataset(
    out_dir: Path,
    n_scenes: int,
    seed: int = 0,
    params: GenerationParams = GenerationParams(),
    prefix: str = "scene",
) -> tuple[Path, Path]:
    """Materialize a dataset: PNGs + gt masks + manifest + world description.

    Every scene shares one set of class weights (drawn from ``seed``) so the
    whole dataset is classified by a single function. Returns
    (manifest_path, world_path); ``world_path`` configures the synthetic
    operator backend, and a ``scenes.json`` with full descriptors is written
    alongside for oracle tooling.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    class_names, class_weights = make_class_weights(seed, params.n_classes, params.weight_scale)

    entries: list[dict] = []
    scene_docs: dict[str, dict] = {}
    for i in range(n_scenes):
        image_id = f"{prefix}-{i:04d}"
        desc, record = make_scene(
            int(np.random.default_rng([seed, 2, i]).integers(0, 2**63 - 1)),
            params,
            image_id=image_id,
            class_names=class_names,
            class_weights=class_weights,
        )
        image_rel = f"images/{image_id}.png"
        write_png_rgb(out_dir / image_rel, record.pixels)
        gt_masks = []
        for descriptor in desc.descriptors:
            mask_rel = f"masks/{image_id}/{_slug(descriptor)}.png"
            write_png_mask(out_dir / mask_rel, object_mask(desc, descriptor))
            gt_masks.append({"label": descriptor, "mask_path": mask_rel})
        entries.append(
            {
                "image_id": image_id,
                "image_path": image_rel,
                "gt_class": record.gt_class,
                "gt_masks": gt_masks,
            }
        )
        scene_docs[image_id] = desc.to_dict()

    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest_path, entries)
    world_path = out_dir / "world.json"
    dump_json(
        {
            "schema_version": WORLD_SCHEMA_VERSION,
            "class_names": list(class_names),
            "class_weights": {c: dict(sorted(w.items())) for c, w in class_weights.items()},
            "background": list(BACKGROUND),
            "palette": {name: list(rgb) for name, rgb in PALETTE.items()},
        },
        world_path,
    )
    dump_json({"schema_version": WORLD_SCHEMA_VERSION, "scenes": scene_docs},
              out_dir / "scenes.json")
    return manifest_path, world_path


def load_scenes(path: Path) -> dict[str, SceneDescriptor]:
    doc = load_json(path)
    return {
        image_id: SceneDescriptor.from_dict(d) for image_id, d in doc["scenes"].items()
    }


def _slug(text: str) -> str:
    return text.replace(" ", "_")
