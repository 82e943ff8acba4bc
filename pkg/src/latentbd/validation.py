"""Input validation helpers used at every public surface."""

from __future__ import annotations

import numpy as np


class InputError(ValueError):
    """Caller passed data that violates a documented precondition."""


def as_image_batch(x, image_size: int | None = None, channels: int | None = None) -> np.ndarray:
    """Coerce to a float32 (N, H, W, C) batch in [0, 1].

    Accepts a single (H, W, C) image or a batch; raises :class:`InputError`
    on shape mismatch, values outside [0, 1], or non-finite entries.
    """
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise InputError(f"expected (N, H, W, C) images, got shape {arr.shape}")
    if image_size is not None and (arr.shape[1] != image_size or arr.shape[2] != image_size):
        raise InputError(f"expected {image_size}x{image_size} images, got {arr.shape[1]}x{arr.shape[2]}")
    if channels is not None and arr.shape[3] != channels:
        raise InputError(f"expected {channels} channel(s), got {arr.shape[3]}")
    if not np.isfinite(arr).all():
        raise InputError("images contain non-finite values")
    if arr.min() < -1e-6 or arr.max() > 1 + 1e-6:
        raise InputError(f"pixel values outside [0, 1]: range [{arr.min():.4g}, {arr.max():.4g}]")
    return np.clip(arr, 0.0, 1.0)


def as_latent_batch(w, dim: int) -> np.ndarray:
    """Coerce to a float64 (N, d) latent batch; single vectors get a batch axis."""
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InputError(f"expected latents of dimension {dim}, got shape {np.asarray(w).shape}")
    if not np.isfinite(arr).all():
        raise InputError("latent codes contain non-finite values")
    return arr


def as_label_array(y, n: int | None = None) -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise InputError(f"expected a 1-D label array, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise InputError("labels must be 0 (fake) or 1 (real)")
    if n is not None and arr.shape[0] != n:
        raise InputError(f"got {arr.shape[0]} labels for {n} samples")
    return arr.astype(np.int64)


def check_in_range(name: str, value: float, lo: float, hi: float,
                   lo_open: bool = False, hi_open: bool = False) -> float:
    ok_lo = value > lo if lo_open else value >= lo
    ok_hi = value < hi if hi_open else value <= hi
    if not (np.isfinite(value) and ok_lo and ok_hi):
        lo_b = "(" if lo_open else "["
        hi_b = ")" if hi_open else "]"
        raise InputError(f"{name}={value!r} outside {lo_b}{lo}, {hi}{hi_b}")
    return value
