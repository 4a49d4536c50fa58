"""Synthetic scene world: generation, rendering, and exact classification."""

from .classify import (
    DetectedObject,
    classify_descriptor,
    classify_pixels,
    detect_objects,
    evidence_logits,
    oracle_contribution,
    softmax,
)
from .scenes import (
    BACKGROUND,
    DEFAULT_CLASS_NAMES,
    PALETTE,
    SHAPES,
    GenerationParams,
    SceneDescriptor,
    SceneObject,
    footprint_area,
    generate_scene,
    load_scenes,
    make_class_weights,
    make_scene,
    object_mask,
    rasterize_object,
    render_scene,
    shape_membership,
    write_scene_dataset,
)

__all__ = [
    "BACKGROUND",
    "DEFAULT_CLASS_NAMES",
    "PALETTE",
    "SHAPES",
    "DetectedObject",
    "GenerationParams",
    "SceneDescriptor",
    "SceneObject",
    "classify_descriptor",
    "classify_pixels",
    "detect_objects",
    "evidence_logits",
    "footprint_area",
    "generate_scene",
    "load_scenes",
    "make_class_weights",
    "make_scene",
    "object_mask",
    "oracle_contribution",
    "rasterize_object",
    "render_scene",
    "shape_membership",
    "softmax",
    "write_scene_dataset",
]
