"""Input validation helpers, sklearn-utils style.

Every helper returns a normalized, read-only numpy array (or the validated
scalar) and raises ``ValueError`` with a message naming the offending field.
"""

from __future__ import annotations

import numpy as np


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def check_pixels(pixels, name: str = "pixels") -> np.ndarray:
    """Validate an H x W x 3 array of 8-bit channels."""
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        raise ValueError(f"{name} must be uint8, got {arr.dtype}")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got {arr.shape}")
    return _freeze(np.ascontiguousarray(arr))


def check_mask_bits(bits, name: str = "mask") -> np.ndarray:
    """Validate an H x W binary array; any nonzero counts as foreground."""
    arr = np.asarray(bits)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got {arr.shape}")
    return _freeze(np.ascontiguousarray(arr != 0))


def check_activation_values(values, name: str = "activation map") -> np.ndarray:
    """Validate an H x W array of finite reals."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return _freeze(np.ascontiguousarray(arr))


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} have mismatched shapes {a.shape} vs {b.shape}")


def check_probability(x, name: str = "probability") -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {x}")
    return x


def check_positive(x, name: str) -> float:
    x = float(x)
    if not x > 0:
        raise ValueError(f"{name} must be positive, got {x}")
    return x
