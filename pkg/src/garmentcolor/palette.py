"""Six-slot dominant palette extraction from masked garment images."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .colorspace import LabColor, chroma, srgb_array_to_lab
from .errors import EmptyInput, EmptyMask
from .naming import DEFAULT_C_MIN, DEFAULT_L_WHITE, ColorTable, css_table

N_SLOTS = 6
DEFAULT_MAX_SAMPLES = 20_000
MAX_ITER = 100
SHIFT_TOL = 1e-4

CHROMATIC = "chromatic"
ACHROMATIC = "achromatic"


@dataclass(frozen=True, eq=False)
class MaskedImage:
    """``pixels`` is ``(h, w, 3)`` uint8 sRGB; ``mask`` is ``(h, w)`` bool (True = clothing)."""

    pixels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        mk = np.ascontiguousarray(self.mask, dtype=bool)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must be (h, w, 3), got {px.shape}")
        if mk.shape != px.shape[:2]:
            raise ValueError(f"mask shape {mk.shape} does not match pixels {px.shape[:2]}")
        if px.shape[0] == 0 and px.shape[1] == 0:
            raise ValueError("image has no pixels")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "mask", mk)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, MaskedImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels) and np.array_equal(self.mask, other.mask)

    @classmethod
    def uniform(cls, rgb, height: int = 8, width: int = 8) -> "MaskedImage":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[...] = np.asarray(rgb, dtype=np.uint8)
        return cls(px, np.ones((height, width), dtype=bool))

    @classmethod
    def load(cls, image_path, mask_path=None) -> "MaskedImage":
        px = np.asarray(Image.open(image_path).convert("RGB"))
        if mask_path is None:
            mk = np.ones(px.shape[:2], dtype=bool)
        else:
            mk = np.asarray(Image.open(mask_path).convert("L")) > 0
        return cls(px, mk)

    def save(self, image_path, mask_path=None) -> None:
        Image.fromarray(self.pixels, "RGB").save(Path(image_path))
        if mask_path is not None:
            Image.fromarray(self.mask.astype(np.uint8) * 255, "L").save(Path(mask_path))


@dataclass(frozen=True)
class Palette:
    colors: tuple[LabColor, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.colors) != N_SLOTS or len(self.weights) != N_SLOTS:
            raise ValueError(f"palette needs exactly {N_SLOTS} slots")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("slot weights must lie in [0, 1]")
        if np.any(np.diff(w) > 1e-12):
            raise ValueError("slot weights must be non-increasing")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"slot weights sum to {w.sum()}, expected 1")

    @property
    def c1(self) -> LabColor:
        return self.colors[0]

    def as_array(self) -> np.ndarray:
        return np.array(self.colors, dtype=float)


def sample_pixels(img: MaskedImage, max_samples: int = DEFAULT_MAX_SAMPLES, seed: int = 0) -> np.ndarray:
    """LAB values of masked pixels, ``(n, 3)``, uniformly subsampled above ``max_samples``."""
    if max_samples < 1:
        raise ValueError("max_samples must be positive")
    rgb = img.pixels[img.mask]
    if rgb.shape[0] == 0:
        raise EmptyMask("mask selects no pixels")
    if rgb.shape[0] > max_samples:
        idx = np.random.default_rng(seed).choice(rgb.shape[0], size=max_samples, replace=False)
        rgb = rgb[np.sort(idx)]
    return srgb_array_to_lab(rgb)


@dataclass
class KMeansResult:
    palette: Palette
    centroids: np.ndarray  # (k_eff, 3), slot order
    labels: np.ndarray  # per-sample index into centroids
    objective_history: list[float] = field(default_factory=list)
    n_iter: int = 0


def unique_rows(x: np.ndarray):
    """Lexicographically sorted distinct rows, the inverse index, and counts."""
    order = np.lexsort(x.T[::-1])
    xs = x[order]
    new = np.ones(len(xs), dtype=bool)
    new[1:] = np.any(xs[1:] != xs[:-1], axis=1)
    group = np.cumsum(new) - 1
    inverse = np.empty(len(x), dtype=np.intp)
    inverse[order] = group
    return xs[new], inverse, np.bincount(group)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.shape[0])]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        i = rng.choice(x.shape[0], p=d2 / total)
        centers.append(x[i])
        d2 = np.minimum(d2, ((x - x[i]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(x: np.ndarray, centers: np.ndarray):
    history = []
    n_iter = 0
    for n_iter in range(1, MAX_ITER + 1):
        d2 = _sq_dists(x, centers)
        labels = d2.argmin(axis=1)
        new = centers.copy()
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                new[j] = x[members].mean(axis=0)
        empty = [j for j in range(centers.shape[0]) if not (labels == j).any()]
        if empty:
            # Reseed each empty cluster at the sample farthest from its own centroid.
            own = ((x - new[labels]) ** 2).sum(axis=1)
            for j in empty:
                far = int(own.argmax())
                new[j] = x[far]
                own[far] = -1.0
        history.append(float(((x - new[labels]) ** 2).sum()))
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < SHIFT_TOL and not empty:
            break
    labels = _sq_dists(x, centers).argmin(axis=1)
    return centers, labels, history, n_iter


def kmeans(samples, k: int = N_SLOTS, seed: int = 0) -> KMeansResult:
    """k-means++ / Lloyd in LAB with squared Euclidean distance.

    Clusters are sorted by pixel mass. With fewer distinct samples than ``k``
    the distinct colors are the clusters and the surplus slots repeat the last
    centroid with zero weight.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    if x.shape[0] == 0:
        raise EmptyInput("no samples to cluster")
    if not 1 <= k <= N_SLOTS:
        raise ValueError(f"k must be in [1, {N_SLOTS}]")
    uniq, inverse, counts = unique_rows(x)
    history: list[float] = []
    n_iter = 0
    if uniq.shape[0] <= k:
        centers, labels = uniq, inverse
        history = [0.0]
    else:
        rng = np.random.default_rng(seed)
        centers, labels, history, n_iter = _lloyd(x, _kmeans_pp(x, k, rng))
        # Final centroids are the means of the returned assignment.
        for j in range(centers.shape[0]):
            if (labels == j).any():
                centers[j] = x[labels == j].mean(axis=0)
        history.append(float(((x - centers[labels]) ** 2).sum()))
        counts = np.bincount(labels, minlength=centers.shape[0])

    order = np.argsort(-counts, kind="stable")
    order = order[counts[order] > 0]
    new_of_old = np.full(centers.shape[0], -1)
    new_of_old[order] = np.arange(order.size)
    labels = new_of_old[labels]
    centers = centers[order]
    counts = counts[order]

    palette = _palette_from([LabColor.from_array(c) for c in centers], counts / counts.sum())
    return KMeansResult(palette, centers, labels, history, n_iter)


def _palette_from(colors, weights) -> Palette:
    """Pad to six slots with zero-weight copies of the last color; renormalize."""
    colors = list(colors)
    weights = np.asarray(weights, dtype=float)
    while len(colors) < N_SLOTS:
        colors.append(colors[-1])
        weights = np.append(weights, 0.0)
    # No residue fix-up: nudging one slot can break ties in the ordering.
    weights = weights / weights.sum()
    return Palette(tuple(colors), tuple(float(v) for v in weights))


def kmeans_palette(samples, k: int = N_SLOTS, seed: int = 0) -> Palette:
    return kmeans(samples, k, seed).palette


def is_chromatic(p: Palette, c_min: float = DEFAULT_C_MIN, l_white: float = DEFAULT_L_WHITE) -> str:
    """Achromatic when the dominant slot is both low-chroma and below white lightness."""
    c1 = p.c1
    if chroma(c1) < c_min and c1.L < l_white:
        return ACHROMATIC
    return CHROMATIC


@dataclass(frozen=True)
class Annotation:
    palette: Palette
    chromatic: str
    bk_c1: str
    css_c1: str


def name_color(p, table: ColorTable | None = None) -> tuple[str, str]:
    """(family, css name) of a LAB point: nearest CSS entry and its family."""
    entry = (table or css_table()).nearest(p)
    return entry.family, entry.name


def annotate(
    img: MaskedImage,
    seed: int = 0,
    *,
    max_samples: int = DEFAULT_MAX_SAMPLES,
    k: int = N_SLOTS,
    c_min: float = DEFAULT_C_MIN,
    l_white: float = DEFAULT_L_WHITE,
    table: ColorTable | None = None,
) -> Annotation:
    samples = sample_pixels(img, max_samples, seed)
    palette = kmeans_palette(samples, k, seed)
    bk, css = name_color(palette.c1, table)
    return Annotation(palette, is_chromatic(palette, c_min, l_white), bk, css)
