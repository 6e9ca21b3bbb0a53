"""Deterministic rasterizer for schema slides.

Paint order: background, rects, lines, images, tables, texts. Output is
8-bit RGB PNG at DPI 72; 1 pt maps to 1 px at scale 1. Rendering is pure,
so repeated runs produce bit-identical images. Anti-aliasing (presentation
mode) supersamples 2x and downsamples; test mode draws hard-edged strokes.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

from .fonts import font_file
from .schema import Slide, TextElement


def _font_for(element: TextElement, px_size: int) -> ImageFont.FreeTypeFont:
    path = font_file(element.font.name, element.font.bold, element.font.italic)
    return ImageFont.truetype(str(path), max(1, px_size))


def _wrap(content: str, font: ImageFont.FreeTypeFont, max_width: float) -> list[str]:
    """Greedy word wrap; overlong words are broken at character level."""
    lines: list[str] = []
    for paragraph in content.split("\n"):
        words = paragraph.split(" ")
        current = ""
        for word in words:
            candidate = word if not current else current + " " + word
            if font.getlength(candidate) <= max_width or not current:
                current = candidate
            else:
                lines.append(current)
                current = word
            # Break words that alone exceed the box width.
            while current and font.getlength(current) > max_width and len(current) > 1:
                cut = len(current)
                while cut > 1 and font.getlength(current[:cut]) > max_width:
                    cut -= 1
                lines.append(current[:cut])
                current = current[cut:]
        lines.append(current)
    return lines


def _draw_text(draw: ImageDraw.ImageDraw, t: TextElement, scale: float) -> None:
    g = t.geometry
    px_size = max(1, round(t.font.size * scale))
    font = _font_for(t, px_size)
    lines = _wrap(t.content, font, g.w * scale)
    line_height = px_size * 1.2
    y = g.y * scale
    bottom = (g.y + g.h) * scale
    for line in lines:
        if y + px_size > bottom + line_height:
            break
        width = font.getlength(line)
        if t.align == "center":
            x = g.x * scale + (g.w * scale - width) / 2.0
        elif t.align == "right":
            x = (g.x + g.w) * scale - width
        else:  # left / justify / distributed render flush left
            x = g.x * scale
        draw.text((x, y), line, fill=t.font.color, font=font)
        if t.font.underline and line:
            uy = y + px_size * 1.05
            draw.line([(x, uy), (x + width, uy)], fill=t.font.color,
                      width=max(1, round(px_size / 14)))
        y += line_height


def _draw_image_placeholder(draw: ImageDraw.ImageDraw, box: tuple[float, float, float, float]) -> None:
    x0, y0, x1, y1 = box
    draw.rectangle([x0, y0, x1, y1], fill="#DDDDDD", outline="#888888", width=1)
    step = 12
    x = x0
    while x < x1 + (y1 - y0):
        draw.line([(x, y0), (x - (y1 - y0), y1)], fill="#BBBBBB", width=1)
        x += step


def _decode_payload(source: str) -> Image.Image | None:
    if source.startswith("data:"):
        try:
            _, b64 = source.split(",", 1)
            return Image.open(io.BytesIO(base64.b64decode(b64))).convert("RGB")
        except Exception:
            return None
    return None


def _paint(slide: Slide, scale: float) -> Image.Image:
    W = round(slide.width * scale)
    H = round(slide.height * scale)
    img = Image.new("RGB", (W, H), slide.background)
    draw = ImageDraw.Draw(img)

    for r in slide.rects:
        g = r.geometry
        box = [g.x * scale, g.y * scale,
               (g.x + g.w) * scale - 1, (g.y + g.h) * scale - 1]
        width = round(r.strokeWidth * scale)
        outline = r.stroke if width > 0 else None
        radius = round(r.rx * scale)
        if radius > 0:
            draw.rounded_rectangle(box, radius=radius, fill=r.fill,
                                   outline=outline, width=max(1, width))
        else:
            draw.rectangle(box, fill=r.fill, outline=outline,
                           width=max(1, width) if outline else 0)

    for ln in slide.lines:
        draw.line([(ln.x1 * scale, ln.y1 * scale), (ln.x2 * scale, ln.y2 * scale)],
                  fill=ln.stroke, width=max(1, round(ln.strokeWidth * scale)))

    for im in slide.images:
        g = im.geometry
        box = (g.x * scale, g.y * scale,
               (g.x + g.w) * scale - 1, (g.y + g.h) * scale - 1)
        payload = _decode_payload(im.source)
        if payload is not None:
            w = max(1, round(g.w * scale))
            h = max(1, round(g.h * scale))
            img.paste(payload.resize((w, h), Image.NEAREST),
                      (round(g.x * scale), round(g.y * scale)))
        else:
            _draw_image_placeholder(draw, box)

    for tb in slide.tables:
        g = tb.geometry
        x0, y0 = g.x * scale, g.y * scale
        cw, ch = g.w * scale / tb.cols, g.h * scale / tb.rows
        draw.rectangle([x0, y0, x0 + g.w * scale - 1, y0 + g.h * scale - 1],
                       outline="#000000", width=1)
        for r_i in range(1, tb.rows):
            draw.line([(x0, y0 + r_i * ch), (x0 + g.w * scale, y0 + r_i * ch)],
                      fill="#000000", width=1)
        for c_i in range(1, tb.cols):
            draw.line([(x0 + c_i * cw, y0), (x0 + c_i * cw, y0 + g.h * scale)],
                      fill="#000000", width=1)
        cell_font = ImageFont.truetype(str(font_file("calibri")),
                                       max(1, round(10 * scale)))
        for r_i in range(tb.rows):
            for c_i in range(tb.cols):
                text = tb.cells[r_i * tb.cols + c_i]
                if text:
                    draw.text((x0 + c_i * cw + 2 * scale, y0 + r_i * ch + 2 * scale),
                              text, fill="#000000", font=cell_font)

    for t in slide.texts:
        _draw_text(draw, t, scale)

    return img


def render_slide(slide: Slide, scale: float = 1.0, antialias: bool = False) -> Image.Image:
    """Rasterize one slide; bit-identical across runs for the same input."""
    if antialias:
        big = _paint(slide, scale * 2.0)
        return big.resize((round(slide.width * scale), round(slide.height * scale)),
                          Image.LANCZOS)
    return _paint(slide, scale)


def png_bytes(slide: Slide, scale: float = 1.0, antialias: bool = False) -> bytes:
    buf = io.BytesIO()
    render_slide(slide, scale, antialias).save(buf, format="PNG", dpi=(72, 72))
    return buf.getvalue()


def rasterize_deck(slides: list[Slide], out_dir: Path | str,
                   scale: float = 1.0, antialias: bool = False) -> dict[str, dict]:
    """Write one PNG per slide (named by slide_id) plus a hash manifest.

    Per-file IO failures are recorded in the manifest and do not abort the
    batch.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict[str, dict] = {}
    for slide in slides:
        stem = slide.slide_id.replace("#", "_").replace("/", "_") or "slide"
        path = out_dir / f"{stem}.png"
        try:
            data = png_bytes(slide, scale, antialias)
            path.write_bytes(data)
        except OSError as exc:
            manifest[slide.slide_id] = {"error": str(exc)}
            continue
        manifest[slide.slide_id] = {
            "path": str(path),
            "sha256": hashlib.sha256(data).hexdigest(),
        }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return manifest
