"""The reference model zoo: one small, fully deterministic model per
operator, selected by identifier through :data:`REGISTRY`.

Each model is a self-contained implementation of its operator's semantics —
region proposal over connected color components, color-driven grounding
with multi-instance union, border-color inpainting, a histogram softmax
classifier, and a hashed bag-of-tokens sentence embedder.  They run on CPU
with no external weight files, so a server is always startable offline;
heavier checkpoints can be added by registering further factories under
new identifiers.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import RequestError, StartupError

#: named anchor colors for proposal phrases and grounding
COLOR_TABLE: dict[str, tuple[int, int, int]] = {
    "red": (200, 40, 40),
    "green": (40, 170, 60),
    "blue": (50, 80, 200),
    "yellow": (230, 210, 50),
    "purple": (140, 60, 180),
    "orange": (240, 140, 30),
    "cyan": (60, 200, 200),
    "magenta": (220, 60, 180),
    "brown": (140, 90, 50),
    "pink": (240, 170, 190),
    "gray": (128, 128, 128),
    "white": (245, 245, 245),
    "black": (20, 20, 20),
}

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _require_cpu(model_id: str, device: str) -> None:
    if device != "cpu":
        raise StartupError(
            f"model {model_id!r} supports device 'cpu' only, got {device!r}"
        )


def nearest_color_name(rgb: Sequence[int]) -> str:
    """Deterministic nearest anchor color by squared RGB distance; ties
    break on table order."""
    r, g, b = (int(v) for v in rgb)
    best_name, best_dist = None, None
    for name, (cr, cg, cb) in COLOR_TABLE.items():
        dist = (r - cr) ** 2 + (g - cg) ** 2 + (b - cb) ** 2
        if best_dist is None or dist < best_dist:
            best_name, best_dist = name, dist
    return best_name


def border_background(pixels: np.ndarray) -> tuple[int, int, int]:
    """Most frequent color along the one-pixel border; ties break on the
    smallest (r, g, b) tuple."""
    edges = np.concatenate(
        [pixels[0, :], pixels[-1, :], pixels[:, 0], pixels[:, -1]], axis=0
    )
    colors, counts = np.unique(edges.reshape(-1, 3), axis=0, return_counts=True)
    order = np.lexsort((colors[:, 2], colors[:, 1], colors[:, 0], -counts))
    winner = colors[order[0]]
    return (int(winner[0]), int(winner[1]), int(winner[2]))


def _dominant_color(pixels: np.ndarray, component: np.ndarray) -> tuple[int, int, int]:
    values = pixels[component].reshape(-1, 3)
    colors, counts = np.unique(values, axis=0, return_counts=True)
    order = np.lexsort((colors[:, 2], colors[:, 1], colors[:, 0], -counts))
    winner = colors[order[0]]
    return (int(winner[0]), int(winner[1]), int(winner[2]))


def _components(pixels: np.ndarray) -> list[np.ndarray]:
    """Connected components of non-background pixels, in label order."""
    background = np.asarray(border_background(pixels), dtype=np.uint8)
    foreground = np.any(pixels != background, axis=2)
    labels, n_found = ndimage.label(foreground)
    return [labels == index for index in range(1, n_found + 1)]


def _shape_word(component: np.ndarray) -> str:
    rows, cols = np.nonzero(component)
    height = int(rows.max()) - int(rows.min()) + 1
    width = int(cols.max()) - int(cols.min()) + 1
    fill = component.sum() / float(height * width)
    if fill >= 0.92:
        return "square" if 0.75 <= height / width <= 1.33 else "block"
    if fill >= 0.62:
        return "circle"
    if fill >= 0.32:
        return "triangle"
    return "shape"


class RegionProposer:
    """Names the visible color regions as bounded '<color> <shape>' phrases,
    largest regions first."""

    model_id = "region-proposer/tiny-v1"

    def __init__(self, options: Mapping, device: str):
        _require_cpu(self.model_id, device)
        self.min_area = int(options.get("min_area", 4))

    def propose(self, pixels: np.ndarray, max_concepts: int) -> list[str]:
        sized = []
        for order, component in enumerate(_components(pixels)):
            area = int(component.sum())
            if area < self.min_area:
                continue
            color = nearest_color_name(_dominant_color(pixels, component))
            sized.append((-area, order, f"{color} {_shape_word(component)}"))
        sized.sort()
        return [phrase for _, _, phrase in sized[:max_concepts]]


class ColorRegionGrounder:
    """Grounds a phrase to the union of every component whose dominant color
    carries the phrase's color word; None when nothing matches."""

    model_id = "color-grounder/tiny-v1"

    def __init__(self, options: Mapping, device: str):
        _require_cpu(self.model_id, device)
        self.min_area = int(options.get("min_area", 1))

    def ground(self, pixels: np.ndarray, concept: str) -> Optional[np.ndarray]:
        wanted = next(
            (t for t in _TOKEN_RE.findall(concept.lower()) if t in COLOR_TABLE),
            None,
        )
        if wanted is None:
            return None
        union = np.zeros(pixels.shape[:2], dtype=bool)
        matched = False
        for component in _components(pixels):
            if int(component.sum()) < self.min_area:
                continue
            if nearest_color_name(_dominant_color(pixels, component)) == wanted:
                union |= component
                matched = True
        return union if matched else None


class BorderFillEditor:
    """Replaces the masked region with the image's border color."""

    model_id = "border-inpaint/tiny-v1"

    def __init__(self, options: Mapping, device: str):
        _require_cpu(self.model_id, device)

    def edit(self, pixels: np.ndarray, mask_bits: np.ndarray) -> np.ndarray:
        if mask_bits.shape != pixels.shape[:2]:
            raise RequestError(
                f"mask shape {mask_bits.shape} does not fit image "
                f"{pixels.shape[:2]}"
            )
        if not mask_bits.any():
            raise RequestError("refusing to edit with an empty mask")
        out = np.array(pixels, dtype=np.uint8, copy=True)
        out[mask_bits] = np.asarray(border_background(pixels), dtype=np.uint8)
        return out


class HistogramSoftmaxClassifier:
    """Softmax over fixed random projections of a 3x3x3 color histogram."""

    model_id = "histogram-softmax/tiny-v1"

    def __init__(self, options: Mapping, device: str):
        _require_cpu(self.model_id, device)
        n_classes = int(options.get("n_classes", 4))
        if n_classes < 2:
            raise StartupError(f"{self.model_id}: need n_classes >= 2, got {n_classes}")
        names = options.get("class_names")
        if names is None:
            names = [f"bridge_class_{i}" for i in range(n_classes)]
        names = [str(n) for n in names]
        if len(names) != n_classes or len(set(names)) != n_classes:
            raise StartupError(
                f"{self.model_id}: class_names must be {n_classes} distinct names"
            )
        self.class_names = tuple(names)
        seed = int(options.get("seed", 0))
        self.scale = float(options.get("scale", 40.0))
        rng = np.random.default_rng([seed, 11])
        self.weights = rng.normal(0.0, 1.0, size=(n_classes, 27))

    def classify(self, pixels: np.ndarray) -> tuple[tuple[str, ...], list[float]]:
        bins = (pixels.astype(np.int64) // 86).clip(0, 2)
        flat = bins[..., 0] * 9 + bins[..., 1] * 3 + bins[..., 2]
        hist = np.bincount(flat.ravel(), minlength=27).astype(np.float64)
        hist /= hist.sum()
        logits = self.scale * (self.weights @ hist)
        shifted = np.exp(logits - logits.max())
        scores = shifted / shifted.sum()
        return self.class_names, [float(v) for v in scores]


class TokenHashEmbedder:
    """L2-normalized signed bag-of-tokens by sha256 feature hashing."""

    model_id = "token-hash/tiny-v1"

    def __init__(self, options: Mapping, device: str):
        _require_cpu(self.model_id, device)
        self.dim = int(options.get("dim", 512))
        if self.dim < 2:
            raise StartupError(f"{self.model_id}: need dim >= 2, got {self.dim}")

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            index = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        else:
            vec[0] = 1.0
        return vec


REGISTRY: dict[str, dict[str, type]] = {
    "proposer": {RegionProposer.model_id: RegionProposer},
    "grounder": {ColorRegionGrounder.model_id: ColorRegionGrounder},
    "editor": {BorderFillEditor.model_id: BorderFillEditor},
    "classifier": {HistogramSoftmaxClassifier.model_id: HistogramSoftmaxClassifier},
    "embedder": {TokenHashEmbedder.model_id: TokenHashEmbedder},
}


@dataclass(frozen=True)
class ModelSuite:
    proposer: RegionProposer
    grounder: ColorRegionGrounder
    editor: BorderFillEditor
    classifier: HistogramSoftmaxClassifier
    embedder: TokenHashEmbedder


def load_models(
    model_ids: Mapping[str, str],
    model_options: Mapping[str, Mapping],
    device: str,
) -> ModelSuite:
    """Resolve every operator's model identifier; unknown ids abort startup."""
    loaded = {}
    for operator, available in REGISTRY.items():
        wanted = model_ids[operator]
        if wanted not in available:
            raise StartupError(
                f"unknown {operator} model {wanted!r}; "
                f"available: {', '.join(sorted(available))}"
            )
        loaded[operator] = available[wanted](model_options.get(operator, {}), device)
    return ModelSuite(**loaded)
