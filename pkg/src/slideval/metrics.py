"""Per-pair error terms, micro PRF1, bootstrap CIs, and parseability curves."""

from __future__ import annotations

import difflib
import math
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .color import contrast_ratio, delta_e2000
from .fonts import canonical_font, font_group
from .matching import center_distance, iou, size_rel


class KindMismatch(ValueError):
    pass


class EmptySample(ValueError):
    pass


# ---------------------------------------------------------------------------
# Text normalization and similarity

_WS_RE = re.compile(r"\s+")


def _strip_punctuation(s: str) -> str:
    # Unicode punctuation category (P*); the exact set is unspecified upstream.
    return "".join(c for c in s if not unicodedata.category(c).startswith("P"))


def normalize_text(s: str) -> str:
    """Lowercase, '&' -> 'and', strip punctuation, collapse whitespace."""
    s = s.lower().replace("&", " and ")
    s = _strip_punctuation(s)
    return _WS_RE.sub(" ", s).strip()


def content_similarity(a: str, b: str) -> float:
    """Ratcliff-Obershelp similarity ratio in [0,1]; both-empty -> 1."""
    if not a and not b:
        return 1.0
    return difflib.SequenceMatcher(None, a, b, autojunk=False).ratio()


# ---------------------------------------------------------------------------
# Per-pair error terms


@dataclass
class MetricRecord:
    """Error terms for one matched (ground truth, prediction) pair."""

    family: str
    one_minus_iou: float | None = None
    d_center: float | None = None
    r_size: float | None = None
    r_ar: float | None = None      # images: aspect-ratio error
    r_rx: float | None = None      # rects: corner-radius error
    r_len: float | None = None     # lines: relative length error
    r_ang: float | None = None     # lines: angular error
    content_sim: float | None = None
    font_family_hit: bool | None = None
    font_group_hit: bool | None = None
    font_size_abs_err: float | None = None
    bold_mismatch: bool | None = None
    italic_mismatch: bool | None = None
    underline_mismatch: bool | None = None
    stroke_width_abs_err: float | None = None
    text_delta_e: float | None = None
    fill_delta_e: float | None = None
    stroke_delta_e: float | None = None
    contrast_shift: float | None = None

    def scalar_terms(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for name, value in vars(self).items():
            if name == "family" or value is None:
                continue
            out[name] = float(value)
        return out


def _clip01(v: float) -> float:
    return min(1.0, max(0.0, v))


def geometry_errors(g, p, *, frame=(960.0, 540.0), epsilon: float = 1.0) -> MetricRecord:
    """Geometry terms for one matched pair; all normalized terms land in [0,1]."""
    if g.kind != p.kind:
        raise KindMismatch(f"{g.kind} vs {p.kind}")
    rec = MetricRecord(family=g.kind)

    if g.kind == "line":
        len_g, len_p = g.length(), p.length()
        rec.r_len = _clip01(abs(len_p - len_g) / max(epsilon, len_g))
        ang_g = math.atan2(g.y2 - g.y1, g.x2 - g.x1)
        ang_p = math.atan2(p.y2 - p.y1, p.x2 - p.x1)
        # Undirected directions: fold the difference into [0, pi/2].
        diff = abs(ang_g - ang_p) % math.pi
        diff = min(diff, math.pi - diff)
        rec.r_ang = diff / (math.pi / 2.0)
        rec.d_center = center_distance(g.geometry, p.geometry, frame)
        return rec

    ga, pa = g.geometry, p.geometry
    rec.one_minus_iou = 1.0 - iou(ga, pa)
    rec.d_center = center_distance(ga, pa, frame)
    rec.r_size = size_rel(ga, pa, epsilon)

    if g.kind == "image":
        ar_g = ga.w / ga.h if ga.h > 0 else 0.0
        ar_p = pa.w / pa.h if pa.h > 0 else 0.0
        rec.r_ar = _clip01(abs(ar_p - ar_g) / max(epsilon, ar_g))
    if g.kind == "rect":
        rec.r_rx = _clip01(abs(p.rx - g.rx) / max(epsilon, g.rx, p.rx))
    return rec


def content_errors(g, p, rec: MetricRecord) -> MetricRecord:
    rec.content_sim = content_similarity(normalize_text(g.content),
                                         normalize_text(p.content))
    return rec


def style_errors(g, p, rec: MetricRecord, *, background: str | None = None) -> MetricRecord:
    """Style terms per family: fonts and text color for texts, fill/stroke
    color and stroke width for rects and lines."""
    if g.kind != p.kind:
        raise KindMismatch(f"{g.kind} vs {p.kind}")

    if g.kind == "text":
        cg, cp = canonical_font(g.font.name), canonical_font(p.font.name)
        rec.font_family_hit = cg == cp
        rec.font_group_hit = font_group(cg) == font_group(cp)
        rec.font_size_abs_err = abs(p.font.size - g.font.size)
        rec.bold_mismatch = g.font.bold != p.font.bold
        rec.italic_mismatch = g.font.italic != p.font.italic
        rec.underline_mismatch = g.font.underline != p.font.underline
        rec.text_delta_e = delta_e2000(g.font.color, p.font.color)
        if background is not None:
            rec.contrast_shift = abs(contrast_ratio(p.font.color, background)
                                     - contrast_ratio(g.font.color, background))
    elif g.kind == "rect":
        rec.fill_delta_e = delta_e2000(g.fill, p.fill)
        rec.stroke_delta_e = delta_e2000(g.stroke, p.stroke)
        rec.stroke_width_abs_err = abs(p.strokeWidth - g.strokeWidth)
    elif g.kind == "line":
        rec.stroke_delta_e = delta_e2000(g.stroke, p.stroke)
        rec.stroke_width_abs_err = abs(p.strokeWidth - g.strokeWidth)
    return rec


def pair_metrics(g, p, *, background: str | None = None,
                 frame=(960.0, 540.0), epsilon: float = 1.0) -> MetricRecord:
    """Full per-pair record: geometry plus family-appropriate content/style."""
    rec = geometry_errors(g, p, frame=frame, epsilon=epsilon)
    if g.kind == "text":
        content_errors(g, p, rec)
    style_errors(g, p, rec, background=background)
    return rec


# ---------------------------------------------------------------------------
# Micro PRF1


@dataclass
class PRF1Counters:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, tp: int = 0, fp: int = 0, fn: int = 0) -> None:
        self.tp += tp
        self.fp += fp
        self.fn += fn

    def merge(self, other: "PRF1Counters") -> None:
        self.add(other.tp, other.fp, other.fn)


def micro_prf1(counters: PRF1Counters) -> tuple[float, float, float]:
    """(P, R, F1) from pooled counts; zero denominators yield 0."""
    p = counters.tp / (counters.tp + counters.fp) if counters.tp + counters.fp else 0.0
    r = counters.tp / (counters.tp + counters.fn) if counters.tp + counters.fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


# ---------------------------------------------------------------------------
# Bootstrap CIs and parseability


def bootstrap_ci(samples: Sequence[float],
                 statistic: Callable[[np.ndarray], float] = np.mean,
                 n_resamples: int = 2000,
                 level: float = 0.95,
                 seed: int = 0) -> tuple[float, float]:
    """Seeded percentile bootstrap interval for a statistic of the samples."""
    if len(samples) == 0:
        raise EmptySample("bootstrap over empty sample")
    data = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(seed)
    stats = np.empty(n_resamples)
    for k in range(n_resamples):
        stats[k] = statistic(rng.choice(data, size=len(data), replace=True))
    lo = (1.0 - level) / 2.0
    return (float(np.quantile(stats, lo)), float(np.quantile(stats, 1.0 - lo)))


DEFAULT_COMPLEXITY_BINS: tuple[tuple[float, float], ...] = (
    (0, 1), (1, 2), (2, 4), (4, 8), (8, 16), (16, 32), (32, math.inf),
)


def complexity_bin(c: float, bins=DEFAULT_COMPLEXITY_BINS) -> int | None:
    """Index of the half-open bin (lo, hi] containing complexity c."""
    for k, (lo, hi) in enumerate(bins):
        if lo < c <= hi:
            return k
    return None


def parseability_curve(records: Sequence[tuple[float, bool]],
                       bins=DEFAULT_COMPLEXITY_BINS,
                       n_resamples: int = 2000,
                       seed: int = 0) -> list[dict]:
    """Per-bin parse-success rate with bootstrap CI.

    ``records`` are (complexity, parsed) pairs; empty bins are omitted.
    """
    out = []
    for k, (lo, hi) in enumerate(bins):
        flags = [1.0 if ok else 0.0 for c, ok in records if lo < c <= hi]
        if not flags:
            continue
        rate = sum(flags) / len(flags)
        ci = bootstrap_ci(flags, n_resamples=n_resamples, seed=seed)
        out.append({"bin": [lo, hi], "n": len(flags), "rate": rate,
                    "ci_lo": ci[0], "ci_hi": ci[1]})
    return out
