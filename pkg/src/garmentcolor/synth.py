"""Deterministic synthetic garment corpora.

Each house has a color regime (a distribution over CSS names). A record draws
its dominant color from the regime, jitters it in LAB, renders a swatch image
with a full mask, and is annotated with exactly the same code path the
``annotate`` command uses, so the stored ground truth is what annotation of
the rendered image returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .colorspace import lab_array_to_srgb
from .manifest import AnnotationRecord, save_manifest
from .naming import css_table
from .palette import MaskedImage, annotate

FLAT = "flat"
TWO_TONE = "two-tone"
SIX_BAND = "six-band"
TEXTURES = (FLAT, TWO_TONE, SIX_BAND)

TWO_TONE_SHARE = 0.7
SIX_BAND_SHARES = (0.40, 0.20, 0.15, 0.10, 0.08, 0.07)
SEASONS = ("spring", "pre-fall", "fall", "resort")


@dataclass(frozen=True)
class HouseRegime:
    name: str
    colors: tuple[tuple[str, float], ...]

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.colors]

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.colors], dtype=float)


# Three contrasting houses: a red-dominated house, a pale pink/purple house and
# a blue/green house, each with a minority of colors from other families.
DEMO_HOUSES = (
    HouseRegime("house-a", (("firebrick", 0.30), ("crimson", 0.20), ("darkred", 0.15), ("navy", 0.15), ("white", 0.10), ("goldenrod", 0.10))),
    HouseRegime("house-b", (("thistle", 0.30), ("plum", 0.20), ("pink", 0.15), ("lightpink", 0.15), ("lavender", 0.10), ("darkolivegreen", 0.10))),
    HouseRegime("house-c", (("teal", 0.25), ("seagreen", 0.20), ("steelblue", 0.20), ("royalblue", 0.15), ("tan", 0.10), ("peru", 0.10))),
)


@dataclass(frozen=True)
class SynthSpec:
    """``secondary`` is the distribution for slots 2..6 (default: uniform over
    every house color); with probability ``coupling`` slot 2 is instead the
    fixed partner color of the record's dominant color."""

    houses: tuple[HouseRegime, ...]
    records_per_house: int = 100
    noise: float = 0.0
    texture: str = FLAT
    seed: int = 0
    secondary: tuple[tuple[str, float], ...] | None = None
    coupling: float = 0.0
    size: int = 64
    year_range: tuple[int, int] = (1991, 2024)

    def __post_init__(self):
        if not self.houses:
            raise ValueError("at least one house is required")
        if self.records_per_house < 1:
            raise ValueError("records_per_house must be at least 1")
        if self.texture not in TEXTURES:
            raise ValueError(f"texture must be one of {TEXTURES}")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling must be in [0, 1]")
        table = css_table()
        for regime in [*(h.colors for h in self.houses), self.secondary or ()]:
            if regime and abs(sum(p for _, p in regime) - 1.0) > 1e-9:
                raise ValueError("mixture probabilities must sum to 1")
            for name, p in regime:
                table[name]
                if p < 0:
                    raise ValueError("mixture probabilities must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        if "houses" in d:
            houses = tuple(HouseRegime(h["name"], tuple((c, float(p)) for c, p in h["colors"])) for h in d["houses"])
        else:
            houses = DEMO_HOUSES
        sec = d.get("secondary")
        return cls(
            houses=houses,
            records_per_house=int(d.get("records_per_house", 100)),
            noise=float(d.get("noise", 0.0)),
            texture=d.get("texture", FLAT),
            seed=int(d.get("seed", 0)),
            secondary=None if sec is None else tuple((c, float(p)) for c, p in sec),
            coupling=float(d.get("coupling", 0.0)),
            size=int(d.get("size", 64)),
            year_range=tuple(d.get("year_range", (1991, 2024))),
        )

    def to_dict(self) -> dict:
        return {
            "houses": [{"name": h.name, "colors": [list(c) for c in h.colors]} for h in self.houses],
            "records_per_house": self.records_per_house,
            "noise": self.noise,
            "texture": self.texture,
            "seed": self.seed,
            "secondary": None if self.secondary is None else [list(c) for c in self.secondary],
            "coupling": self.coupling,
            "size": self.size,
            "year_range": list(self.year_range),
        }

    def secondary_regime(self) -> tuple[list[str], np.ndarray]:
        if self.secondary:
            return [n for n, _ in self.secondary], np.array([p for _, p in self.secondary])
        names = sorted({n for h in self.houses for n in h.names})
        return names, np.full(len(names), 1.0 / len(names))

    def partners(self) -> dict[str, str]:
        """Fixed slot-2 partner for every dominant color, drawn once from the seed."""
        names, _ = self.secondary_regime()
        rng = np.random.default_rng([self.seed, 1])
        out = {}
        for c in sorted({n for h in self.houses for n in h.names}):
            choices = [n for n in names if n != c] or names
            out[c] = choices[int(rng.integers(len(choices)))]
        return out


@dataclass
class SynthCorpus:
    records: list[AnnotationRecord]
    images: dict[str, MaskedImage] = field(repr=False)
    sampled: dict[str, list[str]] = field(repr=False)  # id -> CSS names drawn per rendered slot


def _slot_counts(texture: str, n_pixels: int) -> list[int]:
    if texture == FLAT:
        return [n_pixels]
    shares = (TWO_TONE_SHARE, 1 - TWO_TONE_SHARE) if texture == TWO_TONE else SIX_BAND_SHARES
    counts = [int(round(s * n_pixels)) for s in shares]
    counts[-1] = n_pixels - sum(counts[:-1])
    return counts


def render_swatch(rgbs: Sequence, counts: Sequence[int], size: int) -> MaskedImage:
    """Fill the image row-major with consecutive runs of each color."""
    flat = np.concatenate([np.tile(np.asarray(c, dtype=np.uint8), (n, 1)) for c, n in zip(rgbs, counts)])
    return MaskedImage(flat.reshape(size, size, 3), np.ones((size, size), dtype=bool))


def _jitter_rgb(name: str, noise: float, rng: np.random.Generator) -> np.ndarray:
    lab = np.array(css_table()[name].centroid, dtype=float)
    if noise > 0:
        lab = lab + rng.normal(0.0, noise, 3)
        lab[0] = np.clip(lab[0], 0.0, 100.0)
    rgb, _ = lab_array_to_srgb(lab)
    return rgb


def _draw_secondaries(first: str, n: int, spec: SynthSpec, rng, sec_names, sec_probs, partners) -> list[str]:
    chosen = [first]
    for slot in range(n):
        if slot == 0 and spec.coupling > 0 and rng.random() < spec.coupling:
            chosen.append(partners[first])
            continue
        pick = sec_names[int(rng.choice(len(sec_names), p=sec_probs))]
        for _ in range(20):
            if pick not in chosen:
                break
            pick = sec_names[int(rng.choice(len(sec_names), p=sec_probs))]
        chosen.append(pick)
    return chosen[1:]


def generate_synthetic(spec: SynthSpec) -> SynthCorpus:
    rng = np.random.default_rng(spec.seed)
    sec_names, sec_probs = spec.secondary_regime()
    partners = spec.partners()
    n_pixels = spec.size * spec.size
    counts = _slot_counts(spec.texture, n_pixels)
    records, images, sampled = [], {}, {}
    for house in spec.houses:
        for i in range(spec.records_per_house):
            rid = f"{house.name}-{i:05d}"
            first = house.names[int(rng.choice(len(house.names), p=house.probs))]
            names = [first] + _draw_secondaries(first, len(counts) - 1, spec, rng, sec_names, sec_probs, partners)
            rgbs = [_jitter_rgb(n, spec.noise, rng) for n in names]
            img = render_swatch(rgbs, counts, spec.size)
            ann = annotate(img, seed=spec.seed)
            year = int(rng.integers(spec.year_range[0], spec.year_range[1] + 1))
            season = SEASONS[int(rng.integers(len(SEASONS)))]
            monk = int(rng.integers(1, 11))
            records.append(
                AnnotationRecord(
                    id=rid,
                    image_path=f"images/{rid}.png",
                    mask_path=f"masks/{rid}.png",
                    designer=house.name,
                    season=season,
                    year=year,
                    palette=ann.palette,
                    chromatic=ann.chromatic,
                    bk_c1=ann.bk_c1,
                    css_c1=ann.css_c1,
                    monk=monk,
                    seed=spec.seed,
                )
            )
            images[rid] = img
            sampled[rid] = names
    return SynthCorpus(records, images, sampled)


def write_synthetic(spec: SynthSpec, out_dir) -> Path:
    """Write images/, masks/ and manifest.jsonl under ``out_dir``; return the manifest path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    corpus = generate_synthetic(spec)
    for rec in corpus.records:
        corpus.images[rec.id].save(out / rec.image_path, out / rec.mask_path)
    path = out / "manifest.jsonl"
    save_manifest(corpus.records, path)
    return path
