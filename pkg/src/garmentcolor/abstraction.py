"""Four views of a garment crop: full color, grayscale, silhouette, edge map."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .colorspace import lab_array_to_srgb, srgb_array_to_lab
from .palette import MaskedImage

FULL_COLOR = "full_color"
GRAYSCALE = "grayscale"
SILHOUETTE = "silhouette"
EDGE_MAP = "edge_map"
LEVELS = (FULL_COLOR, GRAYSCALE, SILHOUETTE, EDGE_MAP)

DEFAULT_EDGE_THRESHOLD = 0.2


def luminance(img: MaskedImage) -> np.ndarray:
    """Per-pixel L* as an ``(h, w)`` float array."""
    return srgb_array_to_lab(img.pixels)[..., 0]


def _gray_from_lightness(L: np.ndarray) -> np.ndarray:
    lab = np.stack([L, np.zeros_like(L), np.zeros_like(L)], axis=-1)
    rgb, _ = lab_array_to_srgb(lab)
    return rgb


def sobel_magnitude(values: np.ndarray) -> np.ndarray:
    gx = ndimage.sobel(values, axis=1, mode="nearest")
    gy = ndimage.sobel(values, axis=0, mode="nearest")
    return np.hypot(gx, gy)


def transform(img: MaskedImage, level: str, edge_threshold: float = DEFAULT_EDGE_THRESHOLD) -> MaskedImage:
    """Return ``img`` at the requested abstraction level; the mask is passed through."""
    if level == FULL_COLOR:
        return img
    if level == GRAYSCALE:
        return MaskedImage(_gray_from_lightness(luminance(img)), img.mask)
    if level == SILHOUETTE:
        px = np.zeros(img.pixels.shape, dtype=np.uint8)
        px[img.mask] = 255
        return MaskedImage(px, img.mask)
    if level == EDGE_MAP:
        if not 0.0 <= edge_threshold <= 1.0:
            raise ValueError("edge_threshold is a fraction of the peak magnitude in [0, 1]")
        mag = sobel_magnitude(luminance(img))
        peak = mag.max()
        px = np.zeros(img.pixels.shape, dtype=np.uint8)
        if peak > 0:
            px[mag >= edge_threshold * peak] = 255
        return MaskedImage(px, img.mask)
    raise ValueError(f"unknown abstraction level {level!r}; expected one of {LEVELS}")
