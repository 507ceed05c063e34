"""Berlin-Kay families, the CSS named-color table, and Monk skin tone levels.

The nine family prototypes are the CSS colors that share the family's name.
Every CSS color is assigned to the family whose prototype is nearest under
CIEDE2000, unless the override file says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .colorspace import LabColor, SrgbColor, chroma, delta_e_2000_array, srgb_to_lab
from .errors import EmptyCandidateSet, ParseError, UnknownLabel

BK_FAMILIES: tuple[str, ...] = (
    "red", "orange", "yellow", "green", "blue", "purple", "pink", "brown", "white",
)

FULL = "full"
CHROMATIC_ONLY = "chromatic-only"
DATA_DRIVEN = "data-driven"

# Shared with palette.is_chromatic; duplicated here to avoid an import cycle.
DEFAULT_C_MIN = 12.0
DEFAULT_L_WHITE = 90.0


@dataclass(frozen=True)
class NamedColor:
    name: str
    srgb: SrgbColor
    centroid: LabColor
    family: str


def read_tsv(text: str) -> list[tuple[int, list[str]]]:
    """Parse the tab-separated data-file format into (line number, fields);
    ``#`` starts a comment line."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) < 2 or len(fields) > 3:
            raise ParseError(f"expected 2 or 3 tab-separated fields, got {len(fields)}", lineno)
        rows.append((lineno, fields))
    return rows


def _data_text(name: str) -> str:
    return resources.files("garmentcolor").joinpath("data").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def _css_rows() -> tuple[tuple[str, SrgbColor], ...]:
    """Canonical (name, sRGB) pairs: one name per distinct value, smaller alias wins."""
    by_value: dict[SrgbColor, str] = {}
    for _, fields in read_tsv(_data_text("css_colors.tsv")):
        name, rgb = fields[0].lower(), SrgbColor.from_hex(fields[1])
        if rgb not in by_value or name < by_value[rgb]:
            by_value[rgb] = name
    return tuple(sorted(((n, c) for c, n in by_value.items()), key=lambda t: t[0]))


@lru_cache(maxsize=None)
def load_overrides() -> dict[str, str]:
    """Curated name -> family overrides. The hex column must match the CSS
    table so a stale entry cannot silently apply to a different color."""
    css = dict(_css_rows())
    out = {}
    for lineno, fields in read_tsv(_data_text("family_overrides.tsv")):
        if len(fields) != 3 or fields[2] not in BK_FAMILIES:
            raise ParseError(f"bad override entry {fields!r}", lineno)
        name = fields[0].lower()
        if css.get(name) != SrgbColor.from_hex(fields[1]):
            raise ParseError(f"override {name!r} does not match a CSS table entry", lineno)
        out[name] = fields[2]
    return out


@lru_cache(maxsize=None)
def bk_prototypes() -> tuple[tuple[str, LabColor], ...]:
    rgb = dict(_css_rows())
    return tuple((fam, srgb_to_lab(rgb[fam])) for fam in BK_FAMILIES)


@lru_cache(maxsize=None)
def _prototype_array() -> np.ndarray:
    return np.array([lab for _, lab in bk_prototypes()])


def prototype(family: str) -> LabColor:
    return dict(bk_prototypes())[family]


def assign_family(centroid, prototypes=None, name: str | None = None, overrides=None) -> str:
    """Family of nearest prototype; ``np.argmin`` keeps the first of equal
    distances, which is the fixed family order."""
    if overrides is None:
        overrides = load_overrides()
    if name is not None and name in overrides:
        return overrides[name]
    protos = _prototype_array() if prototypes is None else np.array([p for _, p in prototypes])
    fams = BK_FAMILIES if prototypes is None else tuple(f for f, _ in prototypes)
    d = delta_e_2000_array(np.asarray(centroid, dtype=float), protos)
    return fams[int(np.argmin(d))]


def nearest_bk(p) -> str:
    return assign_family(p, overrides={})


class ColorTable:
    """Ordered, immutable collection of named colors."""

    def __init__(self, entries: Iterable[NamedColor], subset: str = FULL):
        self.entries: tuple[NamedColor, ...] = tuple(entries)
        if not self.entries:
            raise ValueError("color table must not be empty")
        self.subset = subset
        self._by_name = {e.name: e for e in self.entries}
        if len(self._by_name) != len(self.entries):
            raise ValueError("duplicate names in color table")
        self._labs = np.array([e.centroid for e in self.entries])
        self._families = np.array([e.family for e in self.entries])

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> NamedColor:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownLabel(f"unknown CSS color {name!r}") from None

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def of_family(self, family: str) -> list[NamedColor]:
        return [e for e in self.entries if e.family == family]

    def restrict(self, names: Iterable[str], subset: str = DATA_DRIVEN) -> "ColorTable":
        keep = set(names)
        missing = keep - set(self._by_name)
        if missing:
            raise UnknownLabel(f"not in the table: {sorted(missing)}")
        return ColorTable((e for e in self.entries if e.name in keep), subset=subset)

    def nearest(self, p, family: str | None = None) -> NamedColor:
        d = delta_e_2000_array(np.asarray(p, dtype=float), self._labs)
        if family is not None:
            if family not in BK_FAMILIES:
                raise UnknownLabel(f"unknown family {family!r}")
            allowed = self._families == family
            if not allowed.any():
                raise EmptyCandidateSet(f"no {family!r} entries in {self.subset} table")
            d = np.where(allowed, d, np.inf)
        return self.entries[int(np.argmin(d))]


def is_achromatic_lab(c, c_min: float = DEFAULT_C_MIN, l_white: float = DEFAULT_L_WHITE) -> bool:
    return chroma(c) < c_min and c[0] < l_white


@lru_cache(maxsize=None)
def css_table(subset: str = FULL) -> ColorTable:
    """The CSS table; ``chromatic-only`` drops black/gray-like entries but keeps whites.

    A data-driven subset needs observed names; use :meth:`ColorTable.restrict`.
    """
    overrides = load_overrides()
    entries = []
    for name, rgb in _css_rows():
        lab = srgb_to_lab(rgb)
        entries.append(NamedColor(name, rgb, lab, assign_family(lab, name=name, overrides=overrides)))
    full = ColorTable(entries, FULL)
    if subset == FULL:
        return full
    if subset == CHROMATIC_ONLY:
        return ColorTable(
            (e for e in entries if e.family == "white" or not is_achromatic_lab(e.centroid)),
            CHROMATIC_ONLY,
        )
    raise ValueError(f"unknown subset {subset!r}; data-driven tables come from ColorTable.restrict")


def nearest_css(p, table: ColorTable | None = None, family: str | None = None) -> NamedColor:
    return (table or css_table()).nearest(p, family)


@lru_cache(maxsize=None)
def monk_anchors() -> tuple[tuple[int, LabColor], ...]:
    out = []
    for _, fields in read_tsv(_data_text("monk_anchors.tsv")):
        out.append((int(fields[0]), srgb_to_lab(SrgbColor.from_hex(fields[1]))))
    out.sort()
    if [lvl for lvl, _ in out] != list(range(1, 11)):
        raise ParseError("Monk anchor file must list levels 1..10")
    return tuple(out)


def monk_level(p) -> int:
    anchors = np.array([lab for _, lab in monk_anchors()])
    d = delta_e_2000_array(np.asarray(p, dtype=float), anchors)
    return int(np.argmin(d)) + 1


def family_index(family: str) -> int:
    return BK_FAMILIES.index(family)


def check_family(family: str) -> str:
    if family not in BK_FAMILIES:
        raise UnknownLabel(f"unknown Berlin-Kay family {family!r}")
    return family


def data_driven_table(names: Sequence[str], table: ColorTable | None = None) -> ColorTable:
    return (table or css_table()).restrict(names)
