"""Font-name canonicalization, coarse font groups, and renderer font files."""

from __future__ import annotations

import functools
import re
from pathlib import Path

FONT_GROUPS: dict[str, str] = {
    # sans
    "arial": "sans", "calibri": "sans", "helvetica": "sans",
    "helvetica neue": "sans", "segoe ui": "sans", "verdana": "sans",
    "tahoma": "sans", "gill sans": "sans", "inter": "sans", "roboto": "sans",
    "open sans": "sans", "lato": "sans", "montserrat": "sans",
    "source sans pro": "sans", "libre franklin": "sans",
    "quattrocento sans": "sans", "ubuntu": "sans", "barlow": "sans",
    "bahnschrift": "sans", "ibm plex sans": "sans", "soehne": "sans",
    "dosis": "sans", "poppins": "sans", "raleway": "sans",
    "titillium web": "sans", "nunito": "sans", "corbel": "sans",
    "candara": "sans", "century gothic": "sans", "avenir": "sans",
    "avenir next": "sans", "franklin gothic": "sans",
    "arial rounded mt": "sans",
    # serif
    "times new roman": "serif", "georgia": "serif", "garamond": "serif",
    "cambria": "serif", "palatino linotype": "serif",
    "bookman old style": "serif", "elephant": "serif", "merriweather": "serif",
    "playfair display": "serif", "bodoni": "serif", "bodoni mt": "serif",
    "didot": "serif", "tinos": "serif", "cmr10": "serif",
    "american typewriter": "serif",
    # mono
    "courier new": "mono", "courier": "mono", "consolas": "mono",
    "menlo": "mono", "monaco": "mono", "inconsolata": "mono",
    "fira mono": "mono", "source code pro": "mono", "roboto mono": "mono",
    "ibm plex mono": "mono",
    # script / hand / display
    "comic sans ms": "script", "brush script mt": "script",
    "brush script": "script", "amatic sc": "script", "patrick hand": "script",
    "architects daughter": "script", "caveat": "script", "pacifico": "script",
    "lobster": "script",
    "impact": "display", "bebas": "display",
    # others
    "roboto slab": "serif", "carlito": "sans", "asana": "serif",
    "tenorite": "sans", "aptos": "sans",
    "segoe ui emoji": "sans", "segoe ui symbol": "sans",
}

FONT_GROUP_NAMES = ("sans", "serif", "mono", "script", "display", "other")

# Weight/style suffixes commonly baked into OOXML typeface names.
_SUFFIXES = (
    "extra light", "semi bold", "extrabold", "semibold", "extralight",
    "black", "bold", "light", "medium", "regular", "italic", "oblique",
    "thin", "heavy", "condensed",
)


def canonical_font(name: str) -> str:
    """Lowercase, trim, and strip trailing weight/style suffixes."""
    c = re.sub(r"\s+", " ", name.strip().lower())
    changed = True
    while changed:
        changed = False
        for suffix in _SUFFIXES:
            if c.endswith(" " + suffix):
                c = c[: -len(suffix) - 1].rstrip()
                changed = True
    return c


def font_group(canonical: str) -> str:
    """Coarse family class; unmapped names fall back to 'other'."""
    return FONT_GROUPS.get(canonical, "other")


# ---------------------------------------------------------------------------
# Embedded renderer fonts: one open-licensed face per group, with variants.
# DejaVu ships with matplotlib; script/display/other reuse the sans face
# (glyph fidelity to any particular toolchain is a non-goal).

_DEJAVU = {
    "sans": "DejaVuSans",
    "serif": "DejaVuSerif",
    "mono": "DejaVuSansMono",
    "script": "DejaVuSans",
    "display": "DejaVuSans",
    "other": "DejaVuSans",
}

_VARIANTS = {
    # DejaVu naming: Sans uses "Oblique", Serif uses "Italic".
    ("DejaVuSans", False, False): "DejaVuSans.ttf",
    ("DejaVuSans", True, False): "DejaVuSans-Bold.ttf",
    ("DejaVuSans", False, True): "DejaVuSans-Oblique.ttf",
    ("DejaVuSans", True, True): "DejaVuSans-BoldOblique.ttf",
    ("DejaVuSerif", False, False): "DejaVuSerif.ttf",
    ("DejaVuSerif", True, False): "DejaVuSerif-Bold.ttf",
    ("DejaVuSerif", False, True): "DejaVuSerif-Italic.ttf",
    ("DejaVuSerif", True, True): "DejaVuSerif-BoldItalic.ttf",
    ("DejaVuSansMono", False, False): "DejaVuSansMono.ttf",
    ("DejaVuSansMono", True, False): "DejaVuSansMono-Bold.ttf",
    ("DejaVuSansMono", False, True): "DejaVuSansMono-Oblique.ttf",
    ("DejaVuSansMono", True, True): "DejaVuSansMono-BoldOblique.ttf",
}


@functools.lru_cache(maxsize=1)
def _font_dir() -> Path:
    import matplotlib

    return Path(matplotlib.get_data_path()) / "fonts" / "ttf"


def font_file(name: str, bold: bool = False, italic: bool = False) -> Path:
    """TTF path used to rasterize the given font family."""
    family = _DEJAVU[font_group(canonical_font(name))]
    return _font_dir() / _VARIANTS[(family, bold, italic)]
