"""Severity-controlled slide degradation along geometry, text, and style axes.

Every probability and noise scale is a closed-form, non-decreasing function of
a single severity knob s in [0,1] (collected in PARAM_FUNCS so monotonicity is
testable symbolically). All randomness flows through a counter-based Philox
generator keyed by a deterministic hash of (base_seed, slide_id, axis, s), so
outputs are identical across processes and platforms. Each applied operator is
recorded with the exact parameters drawn; replaying a record against the clean
slide reproduces the perturbed slide without touching the RNG.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import color as colorlib
from .schema import (
    FONT_SIZE_MAX,
    FONT_SIZE_MIN,
    BoxGeometry,
    FontSpec,
    Slide,
    TextElement,
    slide_to_json,
)

AXES = ("geometry", "text", "style")

NOOP_EPS = 1e-12

# Closed-form severity parameterization. Values returning fractions of the
# slide frame are annotated as such.
PARAM_FUNCS = {
    "sigma_x_frac": lambda s: 0.04 + 0.16 * s,    # * W
    "sigma_y_frac": lambda s: 0.04 + 0.16 * s,    # * H
    "sigma_log": lambda s: 0.12 + 0.55 * s,
    "p_ext": lambda s: 0.20 * s,
    "p_rep": lambda s: 0.10 * s,
    "p_col": lambda s: 0.08 * s,
    "p_char": lambda s: 0.02 + (0.25 - 0.02) * s,
    "p_drop": lambda s: 0.18 * s,
    "p_ins": lambda s: 0.35 * s,
    "ins_w_hi": lambda s: 0.35 + 0.35 * s,        # U(0.15, .) * W
    "ins_h_hi": lambda s: 0.22 + 0.28 * s,        # U(0.08, .) * H
    "p_fam": lambda s: 0.20 + 0.60 * s,
    "sigma_sz": lambda s: 0.45 * s,
    "p_szext": lambda s: 0.25 * s,
    "p_tog": lambda s: 0.20 * s,
    "p_inj": lambda s: 0.30 * s,
    "p_lowc": lambda s: 0.25 * s,
    "alpha_lowc": lambda s: 0.25 + 0.65 * s,
    "p_bg": lambda s: 0.20 * s,
}

CHAR_OP_WEIGHTS = {"substitute": 0.50, "delete": 0.20, "insert": 0.15, "swap": 0.15}

# QWERTY adjacency for substitute/insert noise; case is preserved separately.
# Symmetric, and letters never map to digits (or vice versa) so character
# noise cannot fabricate numeric runs.
KEYBOARD_NEIGHBORS = {
    "q": "wa", "w": "qes", "e": "wrd", "r": "etf", "t": "ryg", "y": "tuh",
    "u": "yij", "i": "uok", "o": "ipl", "p": "ol",
    "a": "qsz", "s": "awdxz", "d": "sefcx", "f": "drgvc", "g": "fthbv",
    "h": "gyjnb", "j": "hukmn", "k": "jilm", "l": "kop",
    "z": "asx", "x": "zsdc", "c": "xdfv", "v": "cfgb", "b": "vghn",
    "n": "bhjm", "m": "njk",
    "1": "2", "2": "13", "3": "24", "4": "35", "5": "46",
    "6": "57", "7": "68", "8": "79", "9": "80", "0": "9",
}

FILLER_TEXT_POOL = (
    "lorem ipsum",
    "TODO: revise",
    "placeholder text",
    "draft - do not distribute",
    "sample caption",
)

STYLE_FONT_POOL = (
    "calibri", "arial", "georgia", "times new roman",
    "courier new", "comic sans ms", "impact", "verdana",
)

INCONGRUENT_PALETTE = ("#FF0000", "#FFFF00", "#00FFFF", "#FF00FF", "#00FF00")

_NUMERIC_RUN = re.compile(r"\d+(\.\d+)?")


@dataclass
class PerturbationConfig:
    base_seed: int = 0
    allow_clipping: bool = False
    preserve_numbers: bool = True
    max_inserts: int = 3
    pi_geo: float = 1.0
    pi_txt: float = 1.0
    pi_sty: float = 1.0
    filler_pool: tuple[str, ...] = FILLER_TEXT_POOL
    font_pool: tuple[str, ...] = STYLE_FONT_POOL
    palette: tuple[str, ...] = INCONGRUENT_PALETTE


@dataclass
class PerturbationRecord:
    slide_id: str
    axis: str
    severity: float
    seed: int
    events: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "slide_id": self.slide_id, "axis": self.axis,
            "severity": self.severity, "seed": self.seed,
            "events": self.events,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PerturbationRecord":
        d = json.loads(text)
        return cls(slide_id=d["slide_id"], axis=d["axis"],
                   severity=d["severity"], seed=d["seed"], events=d["events"])


def derive_seed(base_seed: int, slide_id: str, axis: str, severity: float) -> int:
    """Stable 64-bit stream seed from the run seed and the task tuple."""
    key = f"{base_seed}|{slide_id}|{axis}|{severity:.6f}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so streams match across platforms."""
    return np.random.Generator(np.random.Philox(key=seed))


# ---------------------------------------------------------------------------
# Geometry axis


def _box_like(slide: Slide) -> list[tuple[str, int, BoxGeometry]]:
    out = []
    for family, items in (("texts", slide.texts), ("rects", slide.rects),
                          ("images", slide.images), ("tables", slide.tables)):
        for i, e in enumerate(items):
            out.append((family, i, e.geometry))
    return out


def _clamp_geometry(g: BoxGeometry, W: float, H: float, allow_clipping: bool) -> None:
    g.w = max(1.0, g.w)
    g.h = max(1.0, g.h)
    if allow_clipping:
        return
    g.w = min(g.w, W)
    g.h = min(g.h, H)
    g.x = min(max(g.x, 0.0), W - g.w)
    g.y = min(max(g.y, 0.0), H - g.h)


def _apply_geometry_event(slide: Slide, ev: dict, allow_clipping: bool) -> None:
    g: BoxGeometry = getattr(slide, ev["family"])[ev["index"]].geometry
    op = ev["op"]
    if op == "translate":
        g.x += ev["dx"]
        g.y += ev["dy"]
    elif op == "scale":
        g.w *= ev["ew"]
        g.h *= ev["eh"]
    elif op == "extreme_size":
        g.w *= ev["r"]
        g.h *= ev["r"]
    elif op == "reposition":
        g.x, g.y = ev["x"], ev["y"]
    elif op == "collapse":
        setattr(g, ev["dim"], ev["value"])
    elif op == "clamp":
        _clamp_geometry(g, slide.width, slide.height, allow_clipping)
    else:
        raise ValueError(f"unknown geometry op {op!r}")


def perturb_geometry(slide: Slide, s: float, rng: np.random.Generator,
                     config: PerturbationConfig | None = None,
                     ) -> tuple[Slide, PerturbationRecord]:
    cfg = config or PerturbationConfig()
    record = PerturbationRecord(slide.slide_id, "geometry", s, 0)
    out = slide.copy()
    if s <= NOOP_EPS:
        return out, record

    W, H = float(out.width), float(out.height)
    sigma_x = PARAM_FUNCS["sigma_x_frac"](s) * W
    sigma_y = PARAM_FUNCS["sigma_y_frac"](s) * H
    sigma_log = PARAM_FUNCS["sigma_log"](s)

    def emit(ev: dict) -> None:
        _apply_geometry_event(out, ev, cfg.allow_clipping)
        record.events.append(ev)

    for family, index, g in _box_like(out):
        if rng.random() >= cfg.pi_geo:
            continue
        emit({"op": "translate", "family": family, "index": index,
              "dx": float(rng.normal(0.0, sigma_x)),
              "dy": float(rng.normal(0.0, sigma_y))})
        emit({"op": "scale", "family": family, "index": index,
              "ew": float(np.exp(rng.normal(0.0, sigma_log))),
              "eh": float(np.exp(rng.normal(0.0, sigma_log)))})
        if rng.random() < PARAM_FUNCS["p_ext"](s):
            lo, hi = ((0.15, 0.50), (1.5, 10.0))[int(rng.integers(2))]
            emit({"op": "extreme_size", "family": family, "index": index,
                  "r": float(rng.uniform(lo, hi))})
        if rng.random() < PARAM_FUNCS["p_rep"](s):
            # Fresh position over valid canvas spots, respecting current size.
            emit({"op": "reposition", "family": family, "index": index,
                  "x": float(rng.uniform(0.0, max(0.0, W - g.w))),
                  "y": float(rng.uniform(0.0, max(0.0, H - g.h)))})
        if rng.random() < PARAM_FUNCS["p_col"](s):
            dim = "w" if rng.integers(2) == 0 else "h"
            emit({"op": "collapse", "family": family, "index": index,
                  "dim": dim, "value": float(rng.uniform(1.0, 3.0))})
        emit({"op": "clamp", "family": family, "index": index})
    return out, record


# ---------------------------------------------------------------------------
# Text axis


def _weighted_choice(rng: np.random.Generator, weights: dict[str, float]) -> str:
    names = list(weights)
    p = np.array([weights[n] for n in names])
    return names[int(rng.choice(len(names), p=p / p.sum()))]


def _neighbor_char(c: str, rng: np.random.Generator) -> str:
    pool = KEYBOARD_NEIGHBORS.get(c.lower())
    if not pool:
        return c
    repl = pool[int(rng.integers(len(pool)))]
    return repl.upper() if c.isupper() else repl


def _noise_segment(segment: str, p_char: float, rng: np.random.Generator) -> str:
    out: list[str] = []
    i = 0
    while i < len(segment):
        c = segment[i]
        if rng.random() >= p_char:
            out.append(c)
            i += 1
            continue
        op = _weighted_choice(rng, CHAR_OP_WEIGHTS)
        if op == "substitute":
            out.append(_neighbor_char(c, rng))
            i += 1
        elif op == "delete":
            i += 1
        elif op == "insert":
            out.append(_neighbor_char(c, rng))
            out.append(c)
            i += 1
        else:  # adjacent swap
            if i + 1 < len(segment):
                out.append(segment[i + 1])
                out.append(c)
                i += 2
            else:
                out.append(c)
                i += 1
    return "".join(out)


def _noise_content(content: str, p_char: float, preserve_numbers: bool,
                   rng: np.random.Generator) -> str:
    if not preserve_numbers:
        return _noise_segment(content, p_char, rng)
    # Numeric runs are kept verbatim in place, which restores them in
    # textual order regardless of what noise does to their surroundings.
    out: list[str] = []
    pos = 0
    for m in _NUMERIC_RUN.finditer(content):
        out.append(_noise_segment(content[pos:m.start()], p_char, rng))
        out.append(m.group(0))
        pos = m.end()
    out.append(_noise_segment(content[pos:], p_char, rng))
    return "".join(out)


def _apply_text_event(slide: Slide, ev: dict) -> None:
    op = ev["op"]
    if op == "set_content":
        slide.texts[ev["index"]].content = ev["content"]
    elif op == "drop_boxes":
        keep = [t for i, t in enumerate(slide.texts) if i not in set(ev["indices"])]
        slide.texts[:] = keep
    elif op == "insert_box":
        e = ev["element"]
        f = e["font"]
        slide.texts.append(TextElement(
            geometry=BoxGeometry(e["x"], e["y"], e["w"], e["h"]),
            content=e["content"],
            font=FontSpec(name=f["name"], size=f["size"], bold=f["bold"],
                          italic=f["italic"], underline=f["underline"],
                          color=f["color"]),
            align=e["align"],
        ))
    else:
        raise ValueError(f"unknown text op {op!r}")


def perturb_text(slide: Slide, s: float, rng: np.random.Generator,
                 config: PerturbationConfig | None = None,
                 ) -> tuple[Slide, PerturbationRecord]:
    cfg = config or PerturbationConfig()
    record = PerturbationRecord(slide.slide_id, "text", s, 0)
    out = slide.copy()
    if s <= NOOP_EPS:
        return out, record

    p_char = PARAM_FUNCS["p_char"](s)
    events: list[dict] = []

    dropped: list[int] = []
    for i, t in enumerate(out.texts):
        if rng.random() >= cfg.pi_txt:
            continue
        noised = _noise_content(t.content, p_char, cfg.preserve_numbers, rng)
        if noised != t.content:
            events.append({"op": "set_content", "index": i, "content": noised})
        if rng.random() < PARAM_FUNCS["p_drop"](s):
            dropped.append(i)
    if dropped:
        events.append({"op": "drop_boxes", "indices": dropped})

    if rng.random() < PARAM_FUNCS["p_ins"](s):
        n_max = min(cfg.max_inserts, 1 + int(math.floor(3 * s)))
        n = int(rng.integers(1, n_max + 1))
        W, H = float(out.width), float(out.height)
        for _ in range(n):
            w = float(rng.uniform(0.15, PARAM_FUNCS["ins_w_hi"](s))) * W
            h = float(rng.uniform(0.08, PARAM_FUNCS["ins_h_hi"](s))) * H
            x = float(rng.uniform(0.0, W - w))
            y = float(rng.uniform(0.0, H - h))
            size = min(FONT_SIZE_MAX, 12.0 + 12.0 * s * float(rng.random()))
            events.append({"op": "insert_box", "element": {
                "x": x, "y": y, "w": w, "h": h,
                "content": cfg.filler_pool[int(rng.integers(len(cfg.filler_pool)))],
                "align": "left",
                "font": {"name": "calibri", "size": size,
                         "bold": bool(rng.random() < 0.10 * s),
                         "italic": bool(rng.random() < 0.10 * s),
                         "underline": bool(rng.random() < 0.10 * s),
                         "color": "#000000"},
            }})

    for ev in events:
        _apply_text_event(out, ev)
    record.events = events
    return out, record


# ---------------------------------------------------------------------------
# Style axis


def _apply_style_event(slide: Slide, ev: dict) -> None:
    op = ev["op"]
    if op == "set_background":
        slide.background = ev["color"]
        return
    font = slide.texts[ev["index"]].font
    if op == "set_family":
        font.name = ev["name"]
    elif op == "set_size":
        font.size = ev["size"]
    elif op == "toggle":
        setattr(font, ev["flag"], not getattr(font, ev["flag"]))
    elif op == "set_color":
        font.color = ev["color"]
    else:
        raise ValueError(f"unknown style op {op!r}")


def _jittered_color(current: str, s: float, rng: np.random.Generator) -> str:
    dh = float(rng.uniform(-30.0, 30.0)) * s
    dl = float(rng.uniform(-0.25, 0.25)) * s
    dsat = float(rng.uniform(-0.20, 0.20)) * s
    return colorlib.jitter_hls(current, dh, dl, dsat)


def perturb_style(slide: Slide, s: float, rng: np.random.Generator,
                  config: PerturbationConfig | None = None,
                  ) -> tuple[Slide, PerturbationRecord]:
    cfg = config or PerturbationConfig()
    record = PerturbationRecord(slide.slide_id, "style", s, 0)
    out = slide.copy()
    if s <= NOOP_EPS:
        return out, record

    from .fonts import canonical_font

    events: list[dict] = []
    for i, t in enumerate(out.texts):
        if rng.random() >= cfg.pi_sty:
            continue
        font = t.font

        if rng.random() < PARAM_FUNCS["p_fam"](s):
            current = canonical_font(font.name)
            pool = [f for f in cfg.font_pool if f != current] or list(cfg.font_pool)
            events.append({"op": "set_family", "index": i,
                           "name": pool[int(rng.integers(len(pool)))]})

        size = font.size * float(np.exp(rng.normal(0.0, PARAM_FUNCS["sigma_sz"](s))))
        if rng.random() < PARAM_FUNCS["p_szext"](s):
            size *= float(rng.uniform(0.12, 3.8))
        size = min(FONT_SIZE_MAX, max(FONT_SIZE_MIN, size))
        if size != font.size:
            events.append({"op": "set_size", "index": i, "size": size})

        for flag in ("bold", "italic", "underline"):
            if rng.random() < PARAM_FUNCS["p_tog"](s):
                events.append({"op": "toggle", "index": i, "flag": flag})

        if rng.random() < PARAM_FUNCS["p_inj"](s):
            new_color = cfg.palette[int(rng.integers(len(cfg.palette)))]
        else:
            new_color = _jittered_color(font.color, s, rng)
        if rng.random() < PARAM_FUNCS["p_lowc"](s):
            alpha = PARAM_FUNCS["alpha_lowc"](s)
            new_color = colorlib.blend(new_color, out.background, alpha)
        if new_color != font.color:
            events.append({"op": "set_color", "index": i, "color": new_color})

    if rng.random() < PARAM_FUNCS["p_bg"](s):
        events.append({"op": "set_background",
                       "color": _jittered_color(out.background, s, rng)})

    for ev in events:
        _apply_style_event(out, ev)
    record.events = events
    return out, record


# ---------------------------------------------------------------------------
# Dispatch, replay, and suite synthesis

_AXIS_FNS = {
    "geometry": perturb_geometry,
    "text": perturb_text,
    "style": perturb_style,
}


def perturb(slide: Slide, axis: str, s: float,
            config: PerturbationConfig | None = None,
            ) -> tuple[Slide, PerturbationRecord]:
    """Apply one axis at severity s with the derived per-task seed."""
    cfg = config or PerturbationConfig()
    seed = derive_seed(cfg.base_seed, slide.slide_id, axis, s)
    out, record = _AXIS_FNS[axis](slide, s, make_rng(seed), cfg)
    record.seed = seed
    return out, record


def replay(slide: Slide, record: PerturbationRecord,
           config: PerturbationConfig | None = None) -> Slide:
    """Re-apply a record to the clean slide; reproduces the perturbed slide."""
    cfg = config or PerturbationConfig()
    out = slide.copy()
    apply_fns = {
        "geometry": lambda ev: _apply_geometry_event(out, ev, cfg.allow_clipping),
        "text": lambda ev: _apply_text_event(out, ev),
        "style": lambda ev: _apply_style_event(out, ev),
    }
    fn = apply_fns[record.axis]
    for ev in record.events:
        fn(ev)
    return out


DEFAULT_SEVERITY_GRID = tuple(round(0.1 * k, 1) for k in range(11))


@dataclass
class ManifestRow:
    slide_id: str
    axis: str
    severity: float
    seed: int
    slide_path: str
    record_path: str


def synthesize_suite(slides: list[Slide], out_dir: Path | str,
                     severities=DEFAULT_SEVERITY_GRID, axes=AXES,
                     config: PerturbationConfig | None = None,
                     max_per_cell: int | None = None) -> list[ManifestRow]:
    """One perturbed slide per (seed slide x axis x severity), written as
    interchange JSON plus a replayable record; returns the manifest rows.

    ``max_per_cell`` caps the number of seed slides used per (axis, severity)
    cell, taking them in input order.
    """
    cfg = config or PerturbationConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: list[ManifestRow] = []
    for axis in axes:
        for s in severities:
            pool = slides if max_per_cell is None else slides[:max_per_cell]
            for slide in pool:
                perturbed, record = perturb(slide, axis, s, cfg)
                stem = f"{slide.slide_id.replace('#', '_').replace('/', '_')}__{axis}__{s:.2f}"
                slide_path = out_dir / f"{stem}.json"
                record_path = out_dir / f"{stem}.record.json"
                slide_path.write_text(slide_to_json(perturbed), encoding="utf-8")
                record_path.write_text(record.to_json(), encoding="utf-8")
                manifest.append(ManifestRow(
                    slide_id=slide.slide_id, axis=axis, severity=s,
                    seed=record.seed, slide_path=str(slide_path),
                    record_path=str(record_path)))
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps([vars(r) for r in manifest], indent=2),
                             encoding="utf-8")
    return manifest
