"""Unified slide element schema: fixed 960x540 px frame, pt fonts, hex colors.

One JSON document per slide with top-level fields
``{size, background, texts, rects, lines, images, tables}`` serves as the
interchange format for ground truth, model predictions, and perturbation
exports alike.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field

SLIDE_W = 960
SLIDE_H = 540

ALIGNMENTS = ("left", "center", "right", "justify", "distributed")

FONT_SIZE_MIN = 6.0
FONT_SIZE_MAX = 120.0

_HEX_RE = re.compile(r"^#[0-9a-fA-F]{6}$")


class ValidationError(ValueError):
    """Schema violation with the offending field path and violation kind."""

    def __init__(self, path: str, kind: str, message: str = ""):
        self.path = path
        self.kind = kind
        super().__init__(f"{path}: {kind}" + (f" ({message})" if message else ""))


def normalize_hex(value: str) -> str:
    """Canonicalize a '#RRGGBB' color to uppercase; idempotent."""
    if not isinstance(value, str) or not _HEX_RE.match(value):
        raise ValueError(f"not a normalized hex color: {value!r}")
    return value.upper()


@dataclass
class BoxGeometry:
    x: float
    y: float
    w: float
    h: float

    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def area(self) -> float:
        return self.w * self.h


@dataclass
class FontSpec:
    name: str
    size: float
    bold: bool = False
    italic: bool = False
    underline: bool = False
    color: str = "#000000"


@dataclass
class TextElement:
    geometry: BoxGeometry
    content: str
    font: FontSpec
    align: str = "left"

    kind = "text"


@dataclass
class RectElement:
    geometry: BoxGeometry
    rx: float = 0.0
    fill: str = "#FFFFFF"
    stroke: str = "#000000"
    strokeWidth: float = 0.0

    kind = "rect"


@dataclass
class LineElement:
    x1: float
    y1: float
    x2: float
    y2: float
    stroke: str = "#000000"
    strokeWidth: float = 1.0

    kind = "line"

    @property
    def geometry(self) -> BoxGeometry:
        """Bounding box of the endpoints (used for matching costs)."""
        x = min(self.x1, self.x2)
        y = min(self.y1, self.y2)
        return BoxGeometry(x, y, abs(self.x2 - self.x1), abs(self.y2 - self.y1))

    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)


@dataclass
class ImageElement:
    geometry: BoxGeometry
    source: str = ""

    kind = "image"


@dataclass
class TableElement:
    geometry: BoxGeometry
    rows: int
    cols: int
    cells: list[str] = field(default_factory=list)

    kind = "table"


@dataclass
class Slide:
    background: str = "#FFFFFF"
    texts: list[TextElement] = field(default_factory=list)
    rects: list[RectElement] = field(default_factory=list)
    lines: list[LineElement] = field(default_factory=list)
    images: list[ImageElement] = field(default_factory=list)
    tables: list[TableElement] = field(default_factory=list)
    slide_id: str = ""
    width: int = SLIDE_W
    height: int = SLIDE_H

    def elements(self) -> list:
        """All elements in z-order family grouping (texts last, as painted)."""
        return [*self.rects, *self.lines, *self.images, *self.tables, *self.texts]

    def copy(self) -> "Slide":
        return copy.deepcopy(self)


def complexity(slide: Slide) -> int:
    """Total element count across all families."""
    return (
        len(slide.texts)
        + len(slide.rects)
        + len(slide.lines)
        + len(slide.images)
        + len(slide.tables)
    )


# ---------------------------------------------------------------------------
# Validation


def _need(doc: dict, key: str, path: str):
    if key not in doc:
        raise ValidationError(f"{path}.{key}" if path else key, "missing")
    return doc[key]


def _number(value, path: str, *, minimum: float | None = None,
            integral: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, "type", f"expected number, got {type(value).__name__}")
    v = float(value)
    if not math.isfinite(v):
        raise ValidationError(path, "format", "non-finite number")
    if integral:
        if abs(v - round(v)) > 0.5:
            raise ValidationError(path, "format", "expected integer px")
        v = float(round(v))
    if minimum is not None and v < minimum:
        raise ValidationError(path, "range", f"{v} < {minimum}")
    return v


def _string(value, path: str) -> str:
    if not isinstance(value, str):
        raise ValidationError(path, "type", f"expected string, got {type(value).__name__}")
    return value


def _color(value, path: str) -> str:
    _string(value, path)
    try:
        return normalize_hex(value)
    except ValueError:
        raise ValidationError(path, "format", repr(value)) from None


def _flag(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(path, "type", "expected boolean")
    return value


def _geometry(doc, path: str, integral: bool) -> BoxGeometry:
    if not isinstance(doc, dict):
        raise ValidationError(path, "type", "expected object")
    return BoxGeometry(
        x=_number(_need(doc, "x", path), f"{path}.x", integral=integral),
        y=_number(_need(doc, "y", path), f"{path}.y", integral=integral),
        w=_number(_need(doc, "w", path), f"{path}.w", minimum=0.0, integral=integral),
        h=_number(_need(doc, "h", path), f"{path}.h", minimum=0.0, integral=integral),
    )


def _font(doc, path: str) -> FontSpec:
    if not isinstance(doc, dict):
        raise ValidationError(path, "type", "expected object")
    size = _number(_need(doc, "size", path), f"{path}.size", minimum=0.0)
    if size <= 0:
        raise ValidationError(f"{path}.size", "range", "font size must be > 0")
    return FontSpec(
        name=_string(_need(doc, "name", path), f"{path}.name"),
        size=size,
        bold=_flag(_need(doc, "bold", path), f"{path}.bold"),
        italic=_flag(_need(doc, "italic", path), f"{path}.italic"),
        underline=_flag(_need(doc, "underline", path), f"{path}.underline"),
        color=_color(_need(doc, "color", path), f"{path}.color"),
    )


def _element_list(doc, key: str):
    value = _need(doc, key, "")
    if not isinstance(value, list):
        raise ValidationError(key, "type", "expected list")
    return value


def validate_slide(doc: dict, *, slide_id: str = "",
                   integral_geometry: bool = False) -> Slide:
    """Strictly validate a parsed slide document into a typed Slide.

    Any missing required field, type mismatch, enum violation, or malformed
    color fails the whole slide with a ValidationError carrying the field
    path. With ``integral_geometry`` (used on model outputs), px fields must
    round to integers within +/-0.5 and are snapped to the rounded value.
    """
    if not isinstance(doc, dict):
        raise ValidationError("", "type", "expected top-level object")

    size = _need(doc, "size", "")
    if not isinstance(size, dict):
        raise ValidationError("size", "type", "expected object")
    w = _number(_need(size, "w", "size"), "size.w")
    h = _number(_need(size, "h", "size"), "size.h")
    if (w, h) != (float(SLIDE_W), float(SLIDE_H)):
        raise ValidationError("size", "range", f"expected {SLIDE_W}x{SLIDE_H}")

    slide = Slide(background=_color(_need(doc, "background", ""), "background"),
                  slide_id=slide_id or str(doc.get("id", "")))

    for i, t in enumerate(_element_list(doc, "texts")):
        path = f"texts[{i}]"
        if not isinstance(t, dict):
            raise ValidationError(path, "type", "expected object")
        align = _string(_need(t, "align", path), f"{path}.align")
        if align not in ALIGNMENTS:
            raise ValidationError(f"{path}.align", "enum", align)
        slide.texts.append(TextElement(
            geometry=_geometry(t, path, integral_geometry),
            content=_string(_need(t, "content", path), f"{path}.content"),
            font=_font(_need(t, "font", path), f"{path}.font"),
            align=align,
        ))

    for i, r in enumerate(_element_list(doc, "rects")):
        path = f"rects[{i}]"
        if not isinstance(r, dict):
            raise ValidationError(path, "type", "expected object")
        slide.rects.append(RectElement(
            geometry=_geometry(r, path, integral_geometry),
            rx=_number(_need(r, "rx", path), f"{path}.rx", minimum=0.0),
            fill=_color(_need(r, "fill", path), f"{path}.fill"),
            stroke=_color(_need(r, "stroke", path), f"{path}.stroke"),
            strokeWidth=_number(_need(r, "strokeWidth", path),
                                f"{path}.strokeWidth", minimum=0.0),
        ))

    for i, ln in enumerate(_element_list(doc, "lines")):
        path = f"lines[{i}]"
        if not isinstance(ln, dict):
            raise ValidationError(path, "type", "expected object")
        slide.lines.append(LineElement(
            x1=_number(_need(ln, "x1", path), f"{path}.x1", integral=integral_geometry),
            y1=_number(_need(ln, "y1", path), f"{path}.y1", integral=integral_geometry),
            x2=_number(_need(ln, "x2", path), f"{path}.x2", integral=integral_geometry),
            y2=_number(_need(ln, "y2", path), f"{path}.y2", integral=integral_geometry),
            stroke=_color(_need(ln, "stroke", path), f"{path}.stroke"),
            strokeWidth=_number(_need(ln, "strokeWidth", path),
                                f"{path}.strokeWidth", minimum=0.0),
        ))

    for i, im in enumerate(_element_list(doc, "images")):
        path = f"images[{i}]"
        if not isinstance(im, dict):
            raise ValidationError(path, "type", "expected object")
        slide.images.append(ImageElement(
            geometry=_geometry(im, path, integral_geometry),
            source=_string(im.get("source", ""), f"{path}.source"),
        ))

    for i, tb in enumerate(_element_list(doc, "tables")):
        path = f"tables[{i}]"
        if not isinstance(tb, dict):
            raise ValidationError(path, "type", "expected object")
        rows = int(_number(_need(tb, "rows", path), f"{path}.rows", minimum=1, integral=True))
        cols = int(_number(_need(tb, "cols", path), f"{path}.cols", minimum=1, integral=True))
        cells = _need(tb, "cells", path)
        if not isinstance(cells, list) or not all(isinstance(c, str) for c in cells):
            raise ValidationError(f"{path}.cells", "type", "expected list of strings")
        if len(cells) != rows * cols:
            raise ValidationError(f"{path}.cells", "range",
                                  f"expected {rows * cols} cells, got {len(cells)}")
        slide.tables.append(TableElement(
            geometry=_geometry(tb, path, integral_geometry),
            rows=rows, cols=cols, cells=list(cells),
        ))

    return slide


# ---------------------------------------------------------------------------
# Serialization


def slide_to_doc(slide: Slide) -> dict:
    def num(v):
        # Canonical JSON numbers: whole values serialize as ints so that a
        # slide and its parsed-back copy are byte-identical.
        f = float(v)
        return int(f) if f.is_integer() else f

    def geom(g: BoxGeometry) -> dict:
        return {"x": num(g.x), "y": num(g.y), "w": num(g.w), "h": num(g.h)}

    doc: dict = {
        "size": {"w": num(slide.width), "h": num(slide.height)},
        "background": slide.background,
        "texts": [
            {**geom(t.geometry), "content": t.content, "align": t.align,
             "font": {"name": t.font.name, "size": num(t.font.size),
                      "bold": t.font.bold, "italic": t.font.italic,
                      "underline": t.font.underline, "color": t.font.color}}
            for t in slide.texts
        ],
        "rects": [
            {**geom(r.geometry), "rx": num(r.rx), "fill": r.fill,
             "stroke": r.stroke, "strokeWidth": num(r.strokeWidth)}
            for r in slide.rects
        ],
        "lines": [
            {"x1": num(ln.x1), "y1": num(ln.y1), "x2": num(ln.x2), "y2": num(ln.y2),
             "stroke": ln.stroke, "strokeWidth": num(ln.strokeWidth)}
            for ln in slide.lines
        ],
        "images": [{**geom(im.geometry), "source": im.source} for im in slide.images],
        "tables": [
            {**geom(tb.geometry), "rows": tb.rows, "cols": tb.cols, "cells": tb.cells}
            for tb in slide.tables
        ],
    }
    if slide.slide_id:
        doc["id"] = slide.slide_id
    return doc


def slide_to_json(slide: Slide) -> str:
    return json.dumps(slide_to_doc(slide), indent=2, sort_keys=False)


def slide_from_json(text: str, *, integral_geometry: bool = False) -> Slide:
    return validate_slide(json.loads(text), integral_geometry=integral_geometry)


def roundtrip(slide: Slide) -> Slide:
    """Serialize to the interchange JSON and parse back; identity on valid slides."""
    return slide_from_json(slide_to_json(slide))
