"""Prediction-to-ground-truth alignment: blended cost, optimal assignment,
threshold gate, and FP/FN bookkeeping.

Matching runs per element family (texts against texts, rects against rects,
and so on); cross-family matches are never proposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .schema import Slide

FAMILIES = ("text", "rect", "line", "image", "table")


class KindMismatch(ValueError):
    pass


@dataclass
class MatchConfig:
    alpha: float = 0.45   # 1 - IoU
    beta: float = 0.25    # normalized center distance
    gamma: float = 0.15   # relative size drift
    delta: float = 0.15   # content dissimilarity (families with similarity)
    tau: float = 0.5      # acceptance threshold on the blended cost
    epsilon: float = 1.0  # px floor for size denominators
    frame: tuple[float, float] = (960.0, 540.0)
    # Optional per-family content similarity plug-ins; text is built in.
    similarity: dict[str, Callable[[object, object], float]] = field(default_factory=dict)

    def weights_for(self, has_similarity: bool) -> tuple[float, float, float, float]:
        """(alpha, beta, gamma, delta); without a similarity function delta is
        forced to 0 and the rest are renormalized to the original sum."""
        total = self.alpha + self.beta + self.gamma + self.delta
        if total <= 0:
            raise ValueError("weights must sum to a positive value")
        if has_similarity:
            return (self.alpha, self.beta, self.gamma, self.delta)
        geo = self.alpha + self.beta + self.gamma
        scale = total / geo
        return (self.alpha * scale, self.beta * scale, self.gamma * scale, 0.0)


@dataclass
class MatchResult:
    matches: list[tuple[int, int, float]] = field(default_factory=list)
    false_positives: list[int] = field(default_factory=list)
    false_negatives: list[int] = field(default_factory=list)

    @property
    def tp(self) -> int:
        return len(self.matches)


def iou(a, b) -> float:
    """Intersection-over-union of two axis-aligned boxes; 0 when the union
    has zero area."""
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area() + b.area() - inter
    return inter / union if union > 0 else 0.0


def center_distance(a, b, frame: tuple[float, float]) -> float:
    """Euclidean center distance normalized by the frame diagonal."""
    (cax, cay), (cbx, cby) = a.center(), b.center()
    return math.hypot(cax - cbx, cay - cby) / math.hypot(*frame)


def size_rel(a, b, epsilon: float) -> float:
    """Mean relative width/height drift; denominators floored at epsilon and
    taken from the first argument (ground truth)."""
    return 0.5 * (abs(a.w - b.w) / max(epsilon, a.w) + abs(a.h - b.h) / max(epsilon, a.h))


def _text_similarity(g, p) -> float:
    from .metrics import content_similarity, normalize_text

    return content_similarity(normalize_text(g.content), normalize_text(p.content))


def _similarity_fn(family: str, cfg: MatchConfig):
    if family in cfg.similarity:
        return cfg.similarity[family]
    if family == "text":
        return _text_similarity
    return None


def blended_cost(g, p, cfg: MatchConfig) -> float:
    """alpha*(1-IoU) + beta*d_center + gamma*size_rel + delta*(1-sim)."""
    if g.kind != p.kind:
        raise KindMismatch(f"{g.kind} vs {p.kind}")
    sim_fn = _similarity_fn(g.kind, cfg)
    a, b, c, d = cfg.weights_for(sim_fn is not None)
    ga, pa = g.geometry, p.geometry
    cost = (a * (1.0 - iou(ga, pa))
            + b * center_distance(ga, pa, cfg.frame)
            + c * size_rel(ga, pa, cfg.epsilon))
    if sim_fn is not None:
        cost += d * (1.0 - sim_fn(g, p))
    return cost


def match_family(gts: list, preds: list, cfg: MatchConfig) -> MatchResult:
    """Optimal assignment within one family, then the threshold gate.

    The rectangular case is squared up by padding with cost tau + 1; padded
    pairs are discarded, so real elements left on a pad land in FP/FN.
    """
    m, n = len(gts), len(preds)
    if m == 0 or n == 0:
        return MatchResult(false_positives=list(range(n)),
                           false_negatives=list(range(m)))

    size = max(m, n)
    cost = np.full((size, size), cfg.tau + 1.0)
    for i, g in enumerate(gts):
        for j, p in enumerate(preds):
            cost[i, j] = blended_cost(g, p, cfg)

    rows, cols = linear_sum_assignment(cost)

    result = MatchResult()
    matched_g: set[int] = set()
    matched_p: set[int] = set()
    for i, j in zip(rows, cols):
        if i >= m or j >= n:
            continue
        if cost[i, j] <= cfg.tau:
            result.matches.append((int(i), int(j), float(cost[i, j])))
            matched_g.add(int(i))
            matched_p.add(int(j))
    result.false_negatives = [i for i in range(m) if i not in matched_g]
    result.false_positives = [j for j in range(n) if j not in matched_p]
    return result


def match_elements(gts: list, preds: list, cfg: MatchConfig) -> dict[str, MatchResult]:
    """Per-family MatchResults for two element lists of one slide.

    Indices in each result refer to positions within that family's sublist
    (in original order).
    """
    results: dict[str, MatchResult] = {}
    for family in FAMILIES:
        g = [e for e in gts if e.kind == family]
        p = [e for e in preds if e.kind == family]
        if g or p:
            results[family] = match_family(g, p, cfg)
    return results


def match_slides(gt: Slide, pred: Slide, cfg: MatchConfig) -> dict[str, MatchResult]:
    return match_elements(gt.elements(), pred.elements(), cfg)
