"""sRGB <-> CIELAB conversion (D65, 2 degree observer) and CIEDE2000.

Scalar functions operate on :class:`SrgbColor` / :class:`LabColor`; the
``*_array`` variants take ``(..., 3)`` numpy arrays and are what the image
code uses.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np

# IEC 61966-2-1 sRGB primaries, D65.
_M_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_M_XYZ_TO_RGB = np.linalg.inv(_M_RGB_TO_XYZ)

# White point taken from the matrix rows so that RGB white lands on a* = b* = 0 exactly.
WHITE_XYZ = _M_RGB_TO_XYZ.sum(axis=1)

_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


class SrgbColor(namedtuple("SrgbColor", "r g b")):
    """8-bit sRGB triple."""

    __slots__ = ()

    def __new__(cls, r, g, b):
        vals = tuple(int(v) for v in (r, g, b))
        for v in vals:
            if not 0 <= v <= 255:
                raise ValueError(f"sRGB channel out of range [0, 255]: {v}")
        return super().__new__(cls, *vals)

    @classmethod
    def from_hex(cls, text: str) -> "SrgbColor":
        s = text.strip().lstrip("#")
        if len(s) != 6:
            raise ValueError(f"expected #RRGGBB, got {text!r}")
        return cls(int(s[0:2], 16), int(s[2:4], 16), int(s[4:6], 16))

    def to_hex(self) -> str:
        return "#{:02X}{:02X}{:02X}".format(*self)


class LabColor(namedtuple("LabColor", "L a b")):
    """CIELAB point. ``L`` is in [0, 100]; ``a`` and ``b`` are finite."""

    __slots__ = ()

    def __new__(cls, L, a, b):
        L, a, b = float(L), float(a), float(b)
        if not (math.isfinite(L) and math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"non-finite LAB value: {(L, a, b)}")
        if not -1e-6 <= L <= 100.0 + 1e-6:
            raise ValueError(f"L* out of range [0, 100]: {L}")
        return super().__new__(cls, min(max(L, 0.0), 100.0), a, b)

    @classmethod
    def from_array(cls, arr) -> "LabColor":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0], arr[1], arr[2])


def _compand_inverse(v: np.ndarray) -> np.ndarray:
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _compand(v: np.ndarray) -> np.ndarray:
    v = np.clip(v, 0.0, None)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * v ** (1.0 / 2.4) - 0.055)


def srgb_array_to_lab(rgb) -> np.ndarray:
    """Convert ``(..., 3)`` 8-bit sRGB values to ``(..., 3)`` LAB, float64."""
    rgb = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = _compand_inverse(rgb)
    xyz = lin @ _M_RGB_TO_XYZ.T
    t = xyz / WHITE_XYZ
    f = np.where(t > _EPS, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([np.clip(L, 0.0, 100.0), a, b], axis=-1)


def lab_array_to_srgb(lab) -> tuple[np.ndarray, np.ndarray]:
    """Convert ``(..., 3)`` LAB to uint8 sRGB.

    Returns ``(rgb, in_gamut)``; out-of-gamut channels are clamped silently and
    flagged in the boolean ``in_gamut`` array.
    """
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    f3 = f**3
    t = np.where(f3 > _EPS, f3, (116.0 * f - 16.0) / _KAPPA)
    # L*-based branch for Y keeps the inverse exact near black.
    L = lab[..., 0]
    t[..., 1] = np.where(L > _KAPPA * _EPS, ((L + 16.0) / 116.0) ** 3, L / _KAPPA)
    xyz = t * WHITE_XYZ
    lin = xyz @ _M_XYZ_TO_RGB.T
    v = _compand(lin) * 255.0
    in_gamut = np.all((v > -0.5) & (v < 255.5), axis=-1)
    rgb = np.clip(np.rint(v), 0, 255).astype(np.uint8)
    return rgb, in_gamut


def srgb_to_lab(c) -> LabColor:
    return LabColor.from_array(srgb_array_to_lab(np.asarray(tuple(SrgbColor(*c)), dtype=float)))


def lab_to_srgb(c) -> tuple[SrgbColor, bool]:
    rgb, ok = lab_array_to_srgb(np.asarray(tuple(c), dtype=float))
    return SrgbColor(*rgb.tolist()), bool(ok)


def chroma(c) -> float:
    return math.hypot(c[1], c[2])


def hue_angle(c) -> float:
    """Hue angle in radians on [0, 2*pi); zero for neutral colors."""
    if c[1] == 0.0 and c[2] == 0.0:
        return 0.0
    return math.atan2(c[2], c[1]) % (2.0 * math.pi)


def delta_e_2000_array(lab1, lab2) -> np.ndarray:
    """CIEDE2000 between broadcastable ``(..., 3)`` arrays, kL = kC = kH = 1."""
    lab1 = np.asarray(lab1, dtype=np.float64)
    lab2 = np.asarray(lab2, dtype=np.float64)
    L1, a1, b1 = lab1[..., 0], lab1[..., 1], lab1[..., 2]
    L2, a2, b2 = lab2[..., 0], lab2[..., 1], lab2[..., 2]

    c_bar = 0.5 * (np.hypot(a1, b1) + np.hypot(a2, b2))
    c7 = c_bar**7
    g = 0.5 * (1.0 - np.sqrt(c7 / (c7 + 25.0**7)))
    a1p = (1.0 + g) * a1
    a2p = (1.0 + g) * a2
    c1p = np.hypot(a1p, b1)
    c2p = np.hypot(a2p, b2)
    h1p = np.degrees(np.arctan2(b1, a1p)) % 360.0
    h2p = np.degrees(np.arctan2(b2, a2p)) % 360.0
    h1p = np.where((a1p == 0) & (b1 == 0), 0.0, h1p)
    h2p = np.where((a2p == 0) & (b2 == 0), 0.0, h2p)

    dLp = L2 - L1
    dCp = c2p - c1p
    cprod = c1p * c2p
    dhp = h2p - h1p
    dhp = np.where(dhp > 180.0, dhp - 360.0, dhp)
    dhp = np.where(dhp < -180.0, dhp + 360.0, dhp)
    dhp = np.where(cprod == 0, 0.0, dhp)
    dHp = 2.0 * np.sqrt(cprod) * np.sin(np.radians(dhp) / 2.0)

    Lp_bar = 0.5 * (L1 + L2)
    Cp_bar = 0.5 * (c1p + c2p)
    hsum = h1p + h2p
    hp_bar = np.where(
        np.abs(h1p - h2p) <= 180.0,
        hsum / 2.0,
        np.where(hsum < 360.0, (hsum + 360.0) / 2.0, (hsum - 360.0) / 2.0),
    )
    hp_bar = np.where(cprod == 0, hsum, hp_bar)

    T = (
        1.0
        - 0.17 * np.cos(np.radians(hp_bar - 30.0))
        + 0.24 * np.cos(np.radians(2.0 * hp_bar))
        + 0.32 * np.cos(np.radians(3.0 * hp_bar + 6.0))
        - 0.20 * np.cos(np.radians(4.0 * hp_bar - 63.0))
    )
    d_theta = 30.0 * np.exp(-(((hp_bar - 275.0) / 25.0) ** 2))
    cp7 = Cp_bar**7
    R_C = 2.0 * np.sqrt(cp7 / (cp7 + 25.0**7))
    lm = (Lp_bar - 50.0) ** 2
    S_L = 1.0 + 0.015 * lm / np.sqrt(20.0 + lm)
    S_C = 1.0 + 0.045 * Cp_bar
    S_H = 1.0 + 0.015 * Cp_bar * T
    R_T = -np.sin(np.radians(2.0 * d_theta)) * R_C

    tl = dLp / S_L
    tc = dCp / S_C
    th = dHp / S_H
    return np.sqrt(np.maximum(tl * tl + tc * tc + th * th + R_T * tc * th, 0.0))


def delta_e_2000(x, y) -> float:
    return float(delta_e_2000_array(tuple(x), tuple(y)))
