import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from slideval.schema import (
    BoxGeometry,
    FontSpec,
    ImageElement,
    LineElement,
    RectElement,
    Slide,
    TableElement,
    TextElement,
)


def make_text(x=100, y=100, w=200, h=50, content="hello world",
              name="calibri", size=18.0, bold=False, italic=False,
              underline=False, color="#000000", align="left"):
    return TextElement(
        geometry=BoxGeometry(x, y, w, h), content=content,
        font=FontSpec(name=name, size=size, bold=bold, italic=italic,
                      underline=underline, color=color),
        align=align)


def make_rect(x=50, y=50, w=100, h=80, rx=0.0, fill="#4C72B0",
              stroke="#000000", strokeWidth=1.0):
    return RectElement(geometry=BoxGeometry(x, y, w, h), rx=rx, fill=fill,
                       stroke=stroke, strokeWidth=strokeWidth)


def make_line(x1=10, y1=20, x2=300, y2=220, stroke="#000000", strokeWidth=1.0):
    return LineElement(x1=x1, y1=y1, x2=x2, y2=y2, stroke=stroke,
                       strokeWidth=strokeWidth)


def make_image(x=400, y=100, w=160, h=90, source=""):
    return ImageElement(geometry=BoxGeometry(x, y, w, h), source=source)


def make_table(x=500, y=300, w=300, h=150, rows=2, cols=2, cells=None):
    cells = cells if cells is not None else [f"c{i}" for i in range(rows * cols)]
    return TableElement(geometry=BoxGeometry(x, y, w, h), rows=rows,
                        cols=cols, cells=cells)


def sample_slide(slide_id="fixture#1", background="#FFFFFF"):
    """One slide containing every element family."""
    return Slide(
        slide_id=slide_id, background=background,
        texts=[make_text(), make_text(x=100, y=300, content="Second block",
                                      size=24.0, align="center")],
        rects=[make_rect(), make_rect(x=600, y=400, rx=12.0)],
        lines=[make_line()],
        images=[make_image()],
        tables=[make_table()],
    )


_WORDS = ("alpha", "beta", "gamma", "delta", "total", "revenue", "plan",
          "growth", "q3", "target", "2024", "summary")


def random_slide(rng: np.random.Generator, slide_id="rand#1",
                 integral=False, max_per_family=3) -> Slide:
    """Random valid slide; with integral=True geometry lands on whole px."""
    def coord(hi):
        v = float(rng.uniform(0, hi))
        return float(round(v)) if integral else v

    slide = Slide(slide_id=slide_id)
    for _ in range(int(rng.integers(1, max_per_family + 1))):
        w, h = coord(300) + 20, coord(100) + 20
        content = " ".join(rng.choice(_WORDS, size=int(rng.integers(1, 5))))
        slide.texts.append(make_text(
            x=coord(960 - w), y=coord(540 - h), w=w, h=h, content=content,
            size=float(rng.integers(8, 44)),
            color="#{:06X}".format(int(rng.integers(0, 1 << 24)))))
    for _ in range(int(rng.integers(0, max_per_family + 1))):
        w, h = coord(300) + 10, coord(200) + 10
        slide.rects.append(make_rect(
            x=coord(960 - w), y=coord(540 - h), w=w, h=h,
            rx=float(rng.integers(0, 10)),
            fill="#{:06X}".format(int(rng.integers(0, 1 << 24)))))
    for _ in range(int(rng.integers(0, max_per_family + 1))):
        # Diagonal lines only: an axis-aligned line has a zero-area endpoint
        # bbox, and the literal IoU convention keeps even identical copies
        # from clearing the match gate.
        x1, y1 = coord(800), coord(400)
        slide.lines.append(make_line(x1=x1, y1=y1, x2=x1 + coord(100) + 10,
                                     y2=y1 + coord(100) + 10))
    if rng.random() < 0.5:
        slide.images.append(make_image(x=coord(700), y=coord(400)))
    if rng.random() < 0.3:
        slide.tables.append(make_table(x=coord(600), y=coord(300)))
    return slide


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """Directory with the two hand-built decks."""
    import decks

    d = tmp_path_factory.mktemp("corpus")
    decks.write_alpha(d)
    decks.write_beta(d)
    return d
