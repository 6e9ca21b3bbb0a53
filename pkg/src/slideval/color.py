"""Color math: sRGB <-> Lab conversion, CIEDE2000, WCAG contrast, HLS jitter.

Lab uses the D65 white point; CIEDE2000 uses unit parametric factors
(kL = kC = kH = 1).
"""

from __future__ import annotations

import colorsys
import math

from .schema import normalize_hex

# D65 reference white taken as the conversion matrix applied to RGB white,
# so #FFFFFF maps to exactly Lab(100, 0, 0).
_WHITE = (
    0.4124564 + 0.3575761 + 0.1804375,
    0.2126729 + 0.7151522 + 0.0721750,
    0.0193339 + 0.1191920 + 0.9503041,
)


def hex_to_rgb(color: str) -> tuple[float, float, float]:
    """'#RRGGBB' -> sRGB components in [0,1]."""
    c = normalize_hex(color)
    return tuple(int(c[i:i + 2], 16) / 255.0 for i in (1, 3, 5))  # type: ignore[return-value]


def rgb_to_hex(rgb: tuple[float, float, float]) -> str:
    vals = [min(255, max(0, round(v * 255.0))) for v in rgb]
    return "#{:02X}{:02X}{:02X}".format(*vals)


def _srgb_to_linear(c: float) -> float:
    return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4


def rgb_to_xyz(rgb: tuple[float, float, float]) -> tuple[float, float, float]:
    r, g, b = (_srgb_to_linear(c) for c in rgb)
    return (
        0.4124564 * r + 0.3575761 * g + 0.1804375 * b,
        0.2126729 * r + 0.7151522 * g + 0.0721750 * b,
        0.0193339 * r + 0.1191920 * g + 0.9503041 * b,
    )


def xyz_to_lab(xyz: tuple[float, float, float]) -> tuple[float, float, float]:
    def f(t: float) -> float:
        return t ** (1.0 / 3.0) if t > (6.0 / 29.0) ** 3 else t / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0

    fx, fy, fz = (f(v / w) for v, w in zip(xyz, _WHITE))
    return (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))


def hex_to_lab(color: str) -> tuple[float, float, float]:
    return xyz_to_lab(rgb_to_xyz(hex_to_rgb(color)))


def delta_e2000_lab(lab1: tuple[float, float, float],
                    lab2: tuple[float, float, float]) -> float:
    """CIEDE2000 color difference between two Lab triples (kL=kC=kH=1).

    Follows the standard formulation (a'-rescaling with G, hue rotation term
    R_T, and the SL/SC/SH weighting functions).
    """
    L1, a1, b1 = lab1
    L2, a2, b2 = lab2

    C1 = math.hypot(a1, b1)
    C2 = math.hypot(a2, b2)
    C_bar = (C1 + C2) / 2.0
    G = 0.5 * (1.0 - math.sqrt(C_bar ** 7 / (C_bar ** 7 + 25.0 ** 7)))

    a1p, a2p = (1 + G) * a1, (1 + G) * a2
    C1p = math.hypot(a1p, b1)
    C2p = math.hypot(a2p, b2)

    def hue(ap: float, b: float) -> float:
        if ap == 0.0 and b == 0.0:
            return 0.0
        h = math.degrees(math.atan2(b, ap))
        return h + 360.0 if h < 0 else h

    h1p, h2p = hue(a1p, b1), hue(a2p, b2)

    dLp = L2 - L1
    dCp = C2p - C1p

    if C1p * C2p == 0.0:
        dhp = 0.0
    else:
        diff = h2p - h1p
        if abs(diff) <= 180.0:
            dhp = diff
        elif diff > 180.0:
            dhp = diff - 360.0
        else:
            dhp = diff + 360.0
    dHp = 2.0 * math.sqrt(C1p * C2p) * math.sin(math.radians(dhp) / 2.0)

    Lp_bar = (L1 + L2) / 2.0
    Cp_bar = (C1p + C2p) / 2.0

    if C1p * C2p == 0.0:
        hp_bar = h1p + h2p
    else:
        s = h1p + h2p
        if abs(h1p - h2p) <= 180.0:
            hp_bar = s / 2.0
        elif s < 360.0:
            hp_bar = (s + 360.0) / 2.0
        else:
            hp_bar = (s - 360.0) / 2.0

    T = (1.0
         - 0.17 * math.cos(math.radians(hp_bar - 30.0))
         + 0.24 * math.cos(math.radians(2.0 * hp_bar))
         + 0.32 * math.cos(math.radians(3.0 * hp_bar + 6.0))
         - 0.20 * math.cos(math.radians(4.0 * hp_bar - 63.0)))

    d_theta = 30.0 * math.exp(-(((hp_bar - 275.0) / 25.0) ** 2))
    R_C = 2.0 * math.sqrt(Cp_bar ** 7 / (Cp_bar ** 7 + 25.0 ** 7))
    R_T = -math.sin(math.radians(2.0 * d_theta)) * R_C

    S_L = 1.0 + 0.015 * (Lp_bar - 50.0) ** 2 / math.sqrt(20.0 + (Lp_bar - 50.0) ** 2)
    S_C = 1.0 + 0.045 * Cp_bar
    S_H = 1.0 + 0.015 * Cp_bar * T

    return math.sqrt(
        (dLp / S_L) ** 2
        + (dCp / S_C) ** 2
        + (dHp / S_H) ** 2
        + R_T * (dCp / S_C) * (dHp / S_H)
    )


def delta_e2000(c1: str, c2: str) -> float:
    """CIEDE2000 between two '#RRGGBB' colors via sRGB -> XYZ(D65) -> Lab."""
    return delta_e2000_lab(hex_to_lab(c1), hex_to_lab(c2))


# ---------------------------------------------------------------------------
# WCAG contrast


def relative_luminance(color: str) -> float:
    r, g, b = (_srgb_to_linear(c) for c in hex_to_rgb(color))
    return 0.2126 * r + 0.7152 * g + 0.0722 * b


def contrast_ratio(c1: str, c2: str) -> float:
    """WCAG 2.x contrast ratio, in [1, 21]."""
    l1, l2 = relative_luminance(c1), relative_luminance(c2)
    hi, lo = max(l1, l2), min(l1, l2)
    return (hi + 0.05) / (lo + 0.05)


# ---------------------------------------------------------------------------
# Perturbation helpers


def jitter_hls(color: str, dh_deg: float, dl: float, ds: float) -> str:
    """Shift a color in HLS; hue wraps mod 360, L/S clamp to [0,1]."""
    h, l, s = colorsys.rgb_to_hls(*hex_to_rgb(color))
    h = (h + dh_deg / 360.0) % 1.0
    l = min(1.0, max(0.0, l + dl))
    s = min(1.0, max(0.0, s + ds))
    return rgb_to_hex(colorsys.hls_to_rgb(h, l, s))


def blend(color: str, toward: str, alpha: float) -> str:
    """Componentwise sRGB blend: (1-alpha)*color + alpha*toward."""
    c1, c2 = hex_to_rgb(color), hex_to_rgb(toward)
    return rgb_to_hex(tuple((1 - alpha) * a + alpha * b for a, b in zip(c1, c2)))  # type: ignore[arg-type]
