"""JSON Lines annotation manifests."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .colorspace import LabColor
from .errors import InvariantViolation, ParseError, UnknownLabel
from .naming import BK_FAMILIES, css_table
from .palette import ACHROMATIC, CHROMATIC, N_SLOTS, Palette

MANIFEST_FORMAT_VERSION = 1
YEAR_BOUNDS = (1991, 2024)


@dataclass(frozen=True)
class AnnotationRecord:
    id: str
    image_path: str
    mask_path: str
    designer: str
    season: str
    year: int | None
    palette: Palette
    chromatic: str
    bk_c1: str
    css_c1: str
    monk: int | None = None
    seed: int = 0

    def validate(self, year_bounds: tuple[int, int] | None = YEAR_BOUNDS) -> "AnnotationRecord":
        def bad(msg):
            raise InvariantViolation(msg, self.id)

        if not self.id:
            bad("empty id")
        if self.chromatic not in (CHROMATIC, ACHROMATIC):
            bad(f"chromatic flag {self.chromatic!r}")
        if self.bk_c1 not in BK_FAMILIES:
            bad(f"unknown family {self.bk_c1!r}")
        try:
            fam = css_table()[self.css_c1].family
        except UnknownLabel:
            bad(f"unknown CSS color {self.css_c1!r}")
        if fam != self.bk_c1:
            bad(f"css_c1 {self.css_c1!r} belongs to {fam}, not bk_c1 {self.bk_c1}")
        if self.monk is not None and not 1 <= self.monk <= 10:
            bad(f"Monk level {self.monk} outside 1..10")
        if self.year is not None and year_bounds is not None:
            lo, hi = year_bounds
            if not lo <= self.year <= hi:
                bad(f"year {self.year} outside [{lo}, {hi}]")
        return self

    @property
    def slot_names(self) -> list[str]:
        """CSS name of each palette slot (nearest entry in the full table)."""
        table = css_table()
        return [table.nearest(c).name for c in self.palette.colors]

    @property
    def present_names(self) -> set[str]:
        """CSS names of the slots that carry pixel mass."""
        return {n for n, w in zip(self.slot_names, self.palette.weights) if w > 0}

    def to_dict(self) -> dict:
        return {
            "format_version": MANIFEST_FORMAT_VERSION,
            "id": self.id,
            "image_path": self.image_path,
            "mask_path": self.mask_path,
            "designer": self.designer,
            "season": self.season,
            "year": self.year,
            "palette": [{"lab": list(c), "weight": w} for c, w in zip(self.palette.colors, self.palette.weights)],
            "chromatic": self.chromatic,
            "bk_c1": self.bk_c1,
            "css_c1": self.css_c1,
            "monk": self.monk,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        rid = str(d.get("id", "?"))
        if d.get("format_version") != MANIFEST_FORMAT_VERSION:
            raise InvariantViolation(f"format_version {d.get('format_version')!r}", rid)
        slots = d["palette"]
        if len(slots) != N_SLOTS:
            raise InvariantViolation(f"palette has {len(slots)} slots", rid)
        try:
            palette = Palette(
                tuple(LabColor(*s["lab"]) for s in slots),
                tuple(float(s["weight"]) for s in slots),
            )
        except ValueError as exc:
            raise InvariantViolation(str(exc), rid) from None
        year = d.get("year")
        monk = d.get("monk")
        return cls(
            id=rid,
            image_path=d.get("image_path", ""),
            mask_path=d.get("mask_path", ""),
            designer=d.get("designer", ""),
            season=d.get("season", ""),
            year=None if year is None else int(year),
            palette=palette,
            chromatic=d["chromatic"],
            bk_c1=d["bk_c1"],
            css_c1=d["css_c1"],
            monk=None if monk is None else int(monk),
            seed=int(d.get("seed", 0)),
        )


def dumps_record(r: AnnotationRecord) -> str:
    return json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False)


def save_manifest(records: Iterable[AnnotationRecord], path) -> None:
    lines = [dumps_record(r) for r in records]
    Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")


def load_manifest(path, year_bounds: tuple[int, int] | None = YEAR_BOUNDS) -> list[AnnotationRecord]:
    out = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, lineno) from None
        if not isinstance(d, dict):
            raise ParseError("record is not a JSON object", lineno)
        try:
            rec = AnnotationRecord.from_dict(d)
        except (KeyError, TypeError) as exc:
            raise ParseError(f"missing or malformed field: {exc}", lineno) from None
        out.append(rec.validate(year_bounds))
    return out


def resolve(manifest_path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else Path(manifest_path).resolve().parent / p


def _bucket(record_id: str) -> float:
    h = hashlib.sha256(record_id.encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big") / 2.0**64


def split_records(records: Sequence[AnnotationRecord], part: str, test_fraction: float = 0.2):
    """Deterministic train/test split keyed on the record id hash."""
    if part == "all":
        return list(records)
    if part not in ("train", "test"):
        raise ValueError(f"unknown split {part!r}")
    if not 0.0 <= test_fraction <= 1.0 or math.isnan(test_fraction):
        raise ValueError("test_fraction must be in [0, 1]")
    want_test = part == "test"
    return [r for r in records if (_bucket(r.id) < test_fraction) == want_test]
