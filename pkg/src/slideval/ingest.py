"""Ground-truth extraction from .pptx decks (ZIP-of-XML OOXML).

Geometry is normalized from EMU into the fixed 960x540 px frame. Fonts and
colors are resolved through the run -> paragraph -> shape -> layout ->
master -> theme inheritance chain; theme tint/shade/luminance transforms are
applied in sRGB before hex canonicalization. Effective font metrics use the
static XML only: explicit normAutofit fontScale attributes are honored, else
the declared size is reported (a documented fidelity gap versus a live
layout engine).
"""

from __future__ import annotations

import colorsys
import posixpath
import re
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from xml.etree import ElementTree as ET

from .schema import (
    SLIDE_H,
    SLIDE_W,
    BoxGeometry,
    FontSpec,
    ImageElement,
    LineElement,
    RectElement,
    Slide,
    TableElement,
    TextElement,
)

NS = {
    "p": "http://schemas.openxmlformats.org/presentationml/2006/main",
    "a": "http://schemas.openxmlformats.org/drawingml/2006/main",
    "r": "http://schemas.openxmlformats.org/officeDocument/2006/relationships",
    "rel": "http://schemas.openxmlformats.org/package/2006/relationships",
}

EMU_PER_INCH = 914400
EMU_PER_PT = 12700

_ALIGN_MAP = {"l": "left", "ctr": "center", "r": "right",
              "just": "justify", "dist": "distributed"}

_PRESET_COLORS = {"black": "#000000", "white": "#FFFFFF", "red": "#FF0000",
                  "green": "#008000", "blue": "#0000FF", "yellow": "#FFFF00",
                  "gray": "#808080", "grey": "#808080"}


class IngestError(Exception):
    pass


class NotAZip(IngestError):
    pass


class UnsupportedLegacyFormat(IngestError):
    pass


class MissingPresentationPart(IngestError):
    pass


class IndexOutOfRange(IngestError):
    pass


class MalformedXml(IngestError):
    pass


class ZeroExtent(ValueError):
    pass


def emu_to_px(value: float, native_extent: float, target_extent: float) -> float:
    """Linear EMU -> px conversion against the native slide extent."""
    if native_extent <= 0:
        raise ZeroExtent(f"native extent {native_extent}")
    return value * target_extent / native_extent


# ---------------------------------------------------------------------------
# Theme and color resolution


@dataclass
class ThemeContext:
    colors: dict[str, str] = field(default_factory=dict)   # scheme slot -> hex
    fonts: dict[str, str] = field(default_factory=dict)    # major/minor -> family
    color_map: dict[str, str] = field(default_factory=dict)  # bg1 -> lt1 etc.

    def scheme_color(self, slot: str) -> str:
        slot = self.color_map.get(slot, slot)
        return self.colors.get(slot, "#000000")


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def _apply_color_transforms(hex_color: str, node: ET.Element) -> str:
    """OOXML tint/shade/lum transforms, applied in sRGB / HLS."""
    from .color import hex_to_rgb, rgb_to_hex

    r, g, b = hex_to_rgb(hex_color)
    for child in node:
        tag = child.tag.split("}")[-1]
        val = child.get("val")
        frac = int(val) / 100000.0 if val is not None else 0.0
        if tag == "tint":
            r, g, b = (c * frac + (1 - frac) for c in (r, g, b))
        elif tag == "shade":
            r, g, b = (c * frac for c in (r, g, b))
        elif tag == "lumMod":
            h, l, s = colorsys.rgb_to_hls(r, g, b)
            r, g, b = colorsys.hls_to_rgb(h, _clamp01(l * frac), s)
        elif tag == "lumOff":
            h, l, s = colorsys.rgb_to_hls(r, g, b)
            r, g, b = colorsys.hls_to_rgb(h, _clamp01(l + frac), s)
        elif tag == "alpha":
            pass  # opacity is not modeled
    return rgb_to_hex((r, g, b))


def _resolve_color_node(node: ET.Element, theme: ThemeContext) -> str | None:
    """Resolve a child color element (srgbClr/schemeClr/sysClr/prstClr)."""
    for child in node:
        tag = child.tag.split("}")[-1]
        if tag == "srgbClr":
            return _apply_color_transforms(f"#{child.get('val', '000000')}", child)
        if tag == "schemeClr":
            base = theme.scheme_color(child.get("val", "tx1"))
            return _apply_color_transforms(base, child)
        if tag == "sysClr":
            return _apply_color_transforms(f"#{child.get('lastClr', '000000')}", child)
        if tag == "prstClr":
            base = _PRESET_COLORS.get(child.get("val", "black"), "#000000")
            return _apply_color_transforms(base, child)
    return None


def _solid_fill(parent: ET.Element | None, theme: ThemeContext) -> str | None:
    if parent is None:
        return None
    fill = parent.find("a:solidFill", NS)
    if fill is None:
        return None
    return _resolve_color_node(fill, theme)


# ---------------------------------------------------------------------------
# Deck handle


@dataclass
class DeckSource:
    path: Path
    slide_count: int
    emu_width: int
    emu_height: int
    slide_parts: list[str]
    zip: zipfile.ZipFile
    warnings: list[str] = field(default_factory=list)

    @property
    def deck_id(self) -> str:
        return self.path.stem


def _read_rels(zf: zipfile.ZipFile, part: str) -> dict[str, str]:
    """Relationship id -> target part path (resolved relative to the part)."""
    rels_path = posixpath.join(posixpath.dirname(part), "_rels",
                               posixpath.basename(part) + ".rels")
    if rels_path not in zf.namelist():
        return {}
    root = ET.fromstring(zf.read(rels_path))
    base = posixpath.dirname(part)
    out = {}
    for rel in root.findall("rel:Relationship", NS):
        target = rel.get("Target", "")
        if rel.get("TargetMode") == "External":
            out[rel.get("Id", "")] = target
        else:
            out[rel.get("Id", "")] = posixpath.normpath(posixpath.join(base, target))
    return out


def open_deck(path: Path | str) -> DeckSource:
    """Open a .pptx container and enumerate its slides in presentation order."""
    path = Path(path)
    head = path.read_bytes()[:8]
    if head.startswith(b"\xd0\xcf\x11\xe0"):
        raise UnsupportedLegacyFormat(f"{path} is a legacy OLE (.ppt) file")
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise NotAZip(str(path)) from exc

    pres_part = "ppt/presentation.xml"
    if pres_part not in zf.namelist():
        raise MissingPresentationPart(str(path))
    try:
        pres = ET.fromstring(zf.read(pres_part))
    except ET.ParseError as exc:
        raise MalformedXml(pres_part) from exc

    sld_sz = pres.find("p:sldSz", NS)
    emu_w = int(sld_sz.get("cx")) if sld_sz is not None else 12192000
    emu_h = int(sld_sz.get("cy")) if sld_sz is not None else 6858000
    if emu_w <= 0 or emu_h <= 0:
        raise MalformedXml("non-positive slide dimensions")

    rels = _read_rels(zf, pres_part)
    parts = []
    for sld in pres.findall("p:sldIdLst/p:sldId", NS):
        rid = sld.get(f"{{{NS['r']}}}id", "")
        if rid in rels:
            parts.append(rels[rid])
    if not parts:
        raise MissingPresentationPart("no slides in presentation part")

    return DeckSource(path=path, slide_count=len(parts), emu_width=emu_w,
                      emu_height=emu_h, slide_parts=parts, zip=zf)


def load_theme(deck: DeckSource, slide_part: str) -> ThemeContext:
    """Resolve the theme chain for one slide: slide -> layout -> master -> theme."""
    zf = deck.zip
    theme = ThemeContext()

    slide_rels = _read_rels(zf, slide_part)
    layout = next((t for t in slide_rels.values() if "slideLayout" in t), None)
    master = None
    if layout:
        layout_rels = _read_rels(zf, layout)
        master = next((t for t in layout_rels.values() if "slideMaster" in t), None)
    theme_part = None
    if master:
        master_rels = _read_rels(zf, master)
        theme_part = next((t for t in master_rels.values() if "theme" in t), None)
    if theme_part is None:
        theme_part = next((n for n in zf.namelist()
                           if n.startswith("ppt/theme/")), None)

    if theme_part:
        root = ET.fromstring(zf.read(theme_part))
        scheme = root.find(".//a:clrScheme", NS)
        if scheme is not None:
            for slot in scheme:
                name = slot.tag.split("}")[-1]
                resolved = _resolve_color_node(slot, theme)
                if resolved:
                    theme.colors[name] = resolved
        for which in ("major", "minor"):
            latin = root.find(f".//a:{which}Font/a:latin", NS)
            if latin is not None and latin.get("typeface"):
                theme.fonts[which] = latin.get("typeface", "")

    if master and master in zf.namelist():
        mroot = ET.fromstring(zf.read(master))
        clr_map = mroot.find("p:clrMap", NS)
        if clr_map is not None:
            theme.color_map = dict(clr_map.attrib)
    theme.color_map.setdefault("bg1", "lt1")
    theme.color_map.setdefault("tx1", "dk1")
    theme.color_map.setdefault("bg2", "lt2")
    theme.color_map.setdefault("tx2", "dk2")
    theme._layout_part = layout  # type: ignore[attr-defined]
    theme._master_part = master  # type: ignore[attr-defined]
    return theme


# ---------------------------------------------------------------------------
# Slide extraction


def _geometry_from_xfrm(xfrm: ET.Element | None, deck: DeckSource,
                        warnings: list[str], what: str) -> BoxGeometry | None:
    if xfrm is None:
        return None
    off = xfrm.find("a:off", NS)
    ext = xfrm.find("a:ext", NS)
    if off is None or ext is None:
        return None
    if xfrm.get("rot") not in (None, "0"):
        warnings.append(f"{what}: rotation {xfrm.get('rot')} ignored; unrotated box emitted")
    to_px_x = lambda v: emu_to_px(v, deck.emu_width, SLIDE_W)
    to_px_y = lambda v: emu_to_px(v, deck.emu_height, SLIDE_H)
    return BoxGeometry(
        x=to_px_x(int(off.get("x", "0"))),
        y=to_px_y(int(off.get("y", "0"))),
        w=to_px_x(int(ext.get("cx", "0"))),
        h=to_px_y(int(ext.get("cy", "0"))),
    )


def _shape_text(tx_body: ET.Element) -> str:
    paragraphs = []
    for p in tx_body.findall("a:p", NS):
        parts = []
        for node in p:
            tag = node.tag.split("}")[-1]
            if tag == "r":
                t = node.find("a:t", NS)
                if t is not None and t.text:
                    parts.append(t.text)
            elif tag == "br":
                parts.append("\n")
        paragraphs.append("".join(parts))
    return "\n".join(paragraphs)


def _autofit_scale(tx_body: ET.Element) -> float:
    body_pr = tx_body.find("a:bodyPr", NS)
    if body_pr is not None:
        autofit = body_pr.find("a:normAutofit", NS)
        if autofit is not None and autofit.get("fontScale"):
            return int(autofit.get("fontScale", "100000")) / 100000.0
    return 1.0


def _first_run_props(tx_body: ET.Element) -> list[ET.Element]:
    """Candidate rPr/defRPr nodes, nearest first."""
    candidates = []
    p = tx_body.find("a:p", NS)
    if p is not None:
        r = p.find("a:r", NS)
        if r is not None:
            rpr = r.find("a:rPr", NS)
            if rpr is not None:
                candidates.append(rpr)
        ppr = p.find("a:pPr", NS)
        if ppr is not None:
            def_rpr = ppr.find("a:defRPr", NS)
            if def_rpr is not None:
                candidates.append(def_rpr)
    lst = tx_body.find("a:lstStyle", NS)
    if lst is not None:
        def_rpr = lst.find("a:lvl1pPr/a:defRPr", NS)
        if def_rpr is not None:
            candidates.append(def_rpr)
    return candidates


def _placeholder_def_rpr(deck: DeckSource, theme: ThemeContext,
                         ph_type: str | None, ph_idx: str | None) -> list[ET.Element]:
    """defRPr candidates from the layout/master placeholder chain."""
    out: list[ET.Element] = []
    zf = deck.zip
    for part in (getattr(theme, "_layout_part", None),
                 getattr(theme, "_master_part", None)):
        if not part or part not in zf.namelist():
            continue
        root = ET.fromstring(zf.read(part))
        for sp in root.findall(".//p:sp", NS):
            ph = sp.find("p:nvSpPr/p:nvPr/p:ph", NS)
            if ph is None:
                continue
            if ph_idx is not None and ph.get("idx") == ph_idx:
                pass
            elif ph_type is not None and ph.get("type") == ph_type:
                pass
            else:
                continue
            tx = sp.find("p:txBody", NS)
            if tx is not None:
                out.extend(_first_run_props(tx))
    # Master-level default text styles (title vs body vs other).
    master_part = getattr(theme, "_master_part", None)
    if master_part and master_part in zf.namelist():
        mroot = ET.fromstring(zf.read(master_part))
        style_tag = {"title": "p:titleStyle", "ctrTitle": "p:titleStyle",
                     "body": "p:bodyStyle", "subTitle": "p:bodyStyle"}.get(
                         ph_type or "", "p:otherStyle")
        styles = mroot.find(f"p:txStyles/{style_tag}", NS)
        if styles is not None:
            def_rpr = styles.find("a:lvl1pPr/a:defRPr", NS)
            if def_rpr is not None:
                out.append(def_rpr)
    return out


def _resolve_font(candidates: list[ET.Element], theme: ThemeContext,
                  autofit: float) -> FontSpec:
    name = size = color = bold = italic = underline = None
    for rpr in candidates:
        if size is None and rpr.get("sz"):
            size = int(rpr.get("sz", "1800")) / 100.0
        if bold is None and rpr.get("b") is not None:
            bold = rpr.get("b") == "1"
        if italic is None and rpr.get("i") is not None:
            italic = rpr.get("i") == "1"
        if underline is None and rpr.get("u") is not None:
            underline = rpr.get("u") not in ("none",)
        if name is None:
            latin = rpr.find("a:latin", NS)
            if latin is not None and latin.get("typeface"):
                name = latin.get("typeface")
        if color is None:
            color = _solid_fill(rpr, theme)

    if name and name.startswith("+mn"):
        name = theme.fonts.get("minor", "calibri")
    elif name and name.startswith("+mj"):
        name = theme.fonts.get("major", "calibri")
    return FontSpec(
        name=name or theme.fonts.get("minor", "calibri"),
        size=(size or 18.0) * autofit,
        bold=bool(bold),
        italic=bool(italic),
        underline=bool(underline),
        color=color or theme.scheme_color("tx1"),
    )


def _alignment(tx_body: ET.Element) -> str:
    ppr = tx_body.find("a:p/a:pPr", NS)
    if ppr is not None and ppr.get("algn"):
        return _ALIGN_MAP.get(ppr.get("algn", "l"), "left")
    return "left"


def _line_props(sp_pr: ET.Element | None, theme: ThemeContext) -> tuple[str, float]:
    stroke = "#000000"  # default when source omits stroke; provenance flagged
    width = 1.0
    if sp_pr is not None:
        ln = sp_pr.find("a:ln", NS)
        if ln is not None:
            c = _solid_fill(ln, theme)
            if c:
                stroke = c
            if ln.get("w"):
                width = int(ln.get("w", "12700")) / EMU_PER_PT
    return stroke, width


def _corner_radius(sp_pr: ET.Element, geom: BoxGeometry) -> float:
    prst = sp_pr.find("a:prstGeom", NS)
    adj = 16667  # OOXML default adjust for roundRect
    if prst is not None:
        gd = prst.find("a:avLst/a:gd", NS)
        if gd is not None:
            m = re.match(r"val (\d+)", gd.get("fmla", ""))
            if m:
                adj = int(m.group(1))
    return min(geom.w, geom.h) * adj / 100000.0


def _background(deck: DeckSource, root: ET.Element, theme: ThemeContext) -> str:
    bg = root.find("p:cSld/p:bg", NS)
    if bg is not None:
        bg_pr = bg.find("p:bgPr", NS)
        c = _solid_fill(bg_pr, theme) if bg_pr is not None else None
        if c:
            return c
        bg_ref = bg.find("p:bgRef", NS)
        if bg_ref is not None:
            c = _resolve_color_node(bg_ref, theme)
            if c:
                return c
    for part in (getattr(theme, "_layout_part", None),
                 getattr(theme, "_master_part", None)):
        if part and part in deck.zip.namelist():
            proot = ET.fromstring(deck.zip.read(part))
            bg_pr = proot.find("p:cSld/p:bg/p:bgPr", NS)
            c = _solid_fill(bg_pr, theme) if bg_pr is not None else None
            if c:
                return c
    return theme.scheme_color("bg1") if theme.colors else "#FFFFFF"


def extract_slide(deck: DeckSource, index: int,
                  theme: ThemeContext | None = None,
                  strict: bool = False) -> Slide:
    """Extract slide ``index`` (1-based) into the unified schema.

    With ``strict`` unsupported shape kinds (charts, SmartArt, groups) are
    skipped; otherwise they are flattened to bounding-box rects with a
    warning recorded on the deck.
    """
    if not 1 <= index <= deck.slide_count:
        raise IndexOutOfRange(f"slide {index} of {deck.slide_count}")
    part = deck.slide_parts[index - 1]
    if theme is None:
        theme = load_theme(deck, part)
    try:
        root = ET.fromstring(deck.zip.read(part))
    except ET.ParseError as exc:
        raise MalformedXml(part) from exc

    warnings = deck.warnings
    slide = Slide(slide_id=f"{deck.deck_id}#{index}",
                  background=_background(deck, root, theme))

    sp_tree = root.find("p:cSld/p:spTree", NS)
    if sp_tree is None:
        raise MalformedXml(f"{part}: no shape tree")

    for node in sp_tree:
        tag = node.tag.split("}")[-1]
        if tag == "sp":
            _extract_shape(node, deck, theme, slide, warnings)
        elif tag == "cxnSp":
            _extract_connector(node, deck, theme, slide, warnings)
        elif tag == "pic":
            _extract_picture(node, deck, theme, slide, part, warnings)
        elif tag == "graphicFrame":
            _extract_frame(node, deck, theme, slide, strict, warnings)
        elif tag == "grpSp":
            geom = _geometry_from_xfrm(node.find("p:grpSpPr/a:xfrm", NS),
                                       deck, warnings, "group")
            if geom is not None and not strict:
                warnings.append(f"{slide.slide_id}: group flattened to bounding box")
                slide.rects.append(RectElement(geometry=geom, fill="#FFFFFF",
                                               stroke="#000000", strokeWidth=0.0))
    return slide


def _extract_shape(sp, deck, theme, slide, warnings) -> None:
    sp_pr = sp.find("p:spPr", NS)
    geom = _geometry_from_xfrm(sp_pr.find("a:xfrm", NS) if sp_pr is not None else None,
                               deck, warnings, slide.slide_id)
    if geom is None:
        return

    prst = sp_pr.find("a:prstGeom", NS) if sp_pr is not None else None
    preset = prst.get("prst") if prst is not None else None

    tx_body = sp.find("p:txBody", NS)
    content = _shape_text(tx_body) if tx_body is not None else ""

    if preset in ("line", "straightConnector1") and not content.strip():
        _append_line_from_box(sp_pr, geom, theme, slide)
        return

    if content.strip():
        ph = sp.find("p:nvSpPr/p:nvPr/p:ph", NS)
        candidates = _first_run_props(tx_body)
        candidates += _placeholder_def_rpr(
            deck, theme,
            ph.get("type") if ph is not None else None,
            ph.get("idx") if ph is not None else None)
        font = _resolve_font(candidates, theme, _autofit_scale(tx_body))
        slide.texts.append(TextElement(geometry=geom, content=content,
                                       font=font, align=_alignment(tx_body)))
        return

    fill = _solid_fill(sp_pr, theme)
    if fill is None:
        return  # no fill, no text: invisible helper shape
    stroke, width = _line_props(sp_pr, theme)
    rx = _corner_radius(sp_pr, geom) if preset == "roundRect" else 0.0
    has_stroke = sp_pr.find("a:ln/a:solidFill", NS) is not None
    slide.rects.append(RectElement(geometry=geom, rx=rx, fill=fill,
                                   stroke=stroke,
                                   strokeWidth=width if has_stroke else 0.0))


def _append_line_from_box(sp_pr, geom: BoxGeometry, theme, slide) -> None:
    xfrm = sp_pr.find("a:xfrm", NS) if sp_pr is not None else None
    flip_h = xfrm is not None and xfrm.get("flipH") == "1"
    flip_v = xfrm is not None and xfrm.get("flipV") == "1"
    x1, x2 = (geom.x + geom.w, geom.x) if flip_h else (geom.x, geom.x + geom.w)
    y1, y2 = (geom.y + geom.h, geom.y) if flip_v else (geom.y, geom.y + geom.h)
    stroke, width = _line_props(sp_pr, theme)
    slide.lines.append(LineElement(x1=x1, y1=y1, x2=x2, y2=y2,
                                   stroke=stroke, strokeWidth=width))


def _extract_connector(cxn, deck, theme, slide, warnings) -> None:
    sp_pr = cxn.find("p:spPr", NS)
    geom = _geometry_from_xfrm(sp_pr.find("a:xfrm", NS) if sp_pr is not None else None,
                               deck, warnings, slide.slide_id)
    if geom is not None:
        _append_line_from_box(sp_pr, geom, theme, slide)


def _extract_picture(pic, deck, theme, slide, part, warnings) -> None:
    sp_pr = pic.find("p:spPr", NS)
    geom = _geometry_from_xfrm(sp_pr.find("a:xfrm", NS) if sp_pr is not None else None,
                               deck, warnings, slide.slide_id)
    if geom is None:
        return
    source = ""
    blip = pic.find("p:blipFill/a:blip", NS)
    if blip is not None:
        rid = blip.get(f"{{{NS['r']}}}embed", "")
        rels = _read_rels(deck.zip, part)
        source = rels.get(rid, rid)
    slide.images.append(ImageElement(geometry=geom, source=source))


def _extract_frame(frame, deck, theme, slide, strict, warnings) -> None:
    geom = _geometry_from_xfrm(frame.find("p:xfrm", NS), deck,
                               warnings, slide.slide_id)
    if geom is None:
        return
    tbl = frame.find(".//a:tbl", NS)
    if tbl is not None:
        grid_cols = tbl.findall("a:tblGrid/a:gridCol", NS)
        trs = tbl.findall("a:tr", NS)
        cells = []
        for tr in trs:
            for tc in tr.findall("a:tc", NS):
                tx = tc.find("a:txBody", NS)
                cells.append(_shape_text(tx) if tx is not None else "")
        if trs and grid_cols:
            slide.tables.append(TableElement(
                geometry=geom, rows=len(trs), cols=len(grid_cols), cells=cells))
        return
    # Charts, SmartArt, OLE: flatten or skip.
    if strict:
        warnings.append(f"{slide.slide_id}: unsupported graphicFrame skipped")
    else:
        warnings.append(f"{slide.slide_id}: unsupported graphicFrame flattened to rect")
        slide.rects.append(RectElement(geometry=geom, fill="#FFFFFF",
                                       stroke="#000000", strokeWidth=0.0))


def extract_deck(path: Path | str, strict: bool = False) -> tuple[DeckSource, list[Slide]]:
    """Open and extract every slide; malformed slides are skipped with a
    warning, never silently dropped."""
    deck = open_deck(path)
    slides = []
    for i in range(1, deck.slide_count + 1):
        try:
            slides.append(extract_slide(deck, i, strict=strict))
        except MalformedXml as exc:
            deck.warnings.append(f"slide {i} skipped: {exc}")
    return deck, slides
