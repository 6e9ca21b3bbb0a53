"""Judge-reliability analytics: normalized degradation scores, adjacent
ordering consistency, calibration error, rank metrics, isotonic scale links,
and cross-model agreement.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


class OutOfScale(ValueError):
    pass


class TooFewPoints(ValueError):
    pass


class InvalidPermutation(ValueError):
    pass


class NoSharedSlides(ValueError):
    pass


# ---------------------------------------------------------------------------
# Normalized degradation


def normalize_score(raw: float, scale: tuple[float, float]) -> float:
    """Map a raw judge score to degradation y* = (max - raw)/(max - min).

    0 means pristine (best raw score), 1 means maximally degraded.
    """
    lo, hi = scale
    if not lo <= raw <= hi:
        raise OutOfScale(f"{raw} outside [{lo}, {hi}]")
    return (hi - raw) / (hi - lo)


@dataclass
class JudgeSeries:
    """Per-slide judge scores over the severity grid, on one scale."""

    slide_id: str
    axis: str
    scale: tuple[float, float]
    points: list[tuple[float, float]] = field(default_factory=list)  # (s, raw)

    def degradations(self) -> list[tuple[float, float]]:
        """(severity, y*) sorted by severity."""
        return sorted((s, normalize_score(raw, self.scale)) for s, raw in self.points)


def poa_adjacent(series: JudgeSeries) -> float:
    """Fraction of consecutive severity steps where y* does not decrease."""
    pts = series.degradations()
    if len(pts) < 2:
        raise TooFewPoints("need at least 2 severity points")
    ok = sum(1 for (_, y0), (_, y1) in zip(pts, pts[1:]) if y1 >= y0)
    return ok / (len(pts) - 1)


def mace(series: JudgeSeries) -> float:
    """Mean absolute calibration error of y* against the identity y* = s."""
    pts = series.degradations()
    if not pts:
        raise TooFewPoints("empty series")
    return sum(abs(y - s) for s, y in pts) / len(pts)


def fidelity(series: JudgeSeries) -> float:
    """Spearman correlation between severity and y* (higher is better)."""
    pts = series.degradations()
    if len(pts) < 2:
        raise TooFewPoints("need at least 2 severity points")
    with warnings.catch_warnings():
        # A constant judge has no rank signal; report 0 instead of warning.
        warnings.simplefilter("ignore", stats.ConstantInputWarning)
        rho = stats.spearmanr([s for s, _ in pts], [y for _, y in pts]).statistic
    return float(rho) if not math.isnan(rho) else 0.0


# ---------------------------------------------------------------------------
# Deck-ordering metrics


@dataclass
class OrderingResult:
    predicted: list[int]
    truth: list[int]
    length_ratio: float
    kendall_tau: float | None = None
    spearman_rho: float | None = None
    exact_match: float | None = None

    @property
    def computable(self) -> bool:
        return self.kendall_tau is not None


def rank_metrics(pred: list[int], truth: list[int]) -> OrderingResult:
    """tau-b, average-rank Spearman rho, and positionwise exact match.

    Rank metrics are computed only when ``pred`` is a same-length valid
    permutation of ``truth``; otherwise only length_ratio is reported.
    A duplicated index raises InvalidPermutation.
    """
    if len(set(truth)) != len(truth):
        raise InvalidPermutation("truth contains duplicates")
    result = OrderingResult(predicted=list(pred), truth=list(truth),
                            length_ratio=len(pred) / len(truth) if truth else 0.0)
    if len(pred) != len(set(pred)):
        raise InvalidPermutation("prediction contains duplicates")
    if len(pred) != len(truth) or set(pred) != set(truth):
        return result

    tau = stats.kendalltau(truth, pred).statistic
    rho = stats.spearmanr(truth, pred).statistic
    result.kendall_tau = float(tau)
    result.spearman_rho = float(rho)
    result.exact_match = sum(a == b for a, b in zip(pred, truth)) / len(truth)
    return result


# ---------------------------------------------------------------------------
# Isotonic scale link


def pava(y: list[float], weights: list[float] | None = None) -> list[float]:
    """Non-decreasing least-squares fit by pool-adjacent-violators."""
    if weights is None:
        weights = [1.0] * len(y)
    # Blocks of (mean, weight, count), merged while out of order.
    blocks: list[list[float]] = []
    for yi, wi in zip(y, weights):
        blocks.append([yi, wi, 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            m2, w2, c2 = blocks.pop()
            m1, w1, c1 = blocks.pop()
            w = w1 + w2
            blocks.append([(m1 * w1 + m2 * w2) / w, w, c1 + c2])
    out: list[float] = []
    for mean, _, count in blocks:
        out.extend([mean] * count)
    return out


@dataclass
class IsotonicFit:
    thresholds: list[float]   # sorted unique x
    values: list[float]       # fitted y per threshold (non-decreasing)
    r2: float
    rmse: float
    degenerate: bool = False  # constant-y input; r2 reported as 0

    def predict(self, x: float) -> float:
        """Step-function lookup with flat extrapolation beyond the data."""
        if not self.thresholds:
            raise TooFewPoints("empty fit")
        idx = bisect_right(self.thresholds, x) - 1
        return self.values[max(0, idx)]


def isotonic_fit(x: list[float], y: list[float]) -> IsotonicFit:
    """Monotone non-decreasing least-squares map y ~ f(x) via PAVA.

    Points tied in x are pooled (weighted by count) before fitting. R^2 is
    computed against the fitted values on the original points.
    """
    if len(x) != len(y) or len(x) < 2:
        raise TooFewPoints("need at least 2 paired points")
    order = sorted(range(len(x)), key=lambda i: x[i])
    xs = [x[i] for i in order]
    ys = [y[i] for i in order]

    grouped_x: list[float] = []
    grouped_y: list[float] = []
    grouped_w: list[float] = []
    i = 0
    while i < len(xs):
        j = i
        while j < len(xs) and xs[j] == xs[i]:
            j += 1
        grouped_x.append(xs[i])
        grouped_y.append(sum(ys[i:j]) / (j - i))
        grouped_w.append(float(j - i))
        i = j

    fitted = pava(grouped_y, grouped_w)

    lookup = dict(zip(grouped_x, fitted))
    pred = [lookup[xi] for xi in xs]
    ss_res = sum((yi - pi) ** 2 for yi, pi in zip(ys, pred))
    mean_y = sum(ys) / len(ys)
    ss_tot = sum((yi - mean_y) ** 2 for yi in ys)
    degenerate = min(ys) == max(ys)
    r2 = 0.0 if degenerate else 1.0 - ss_res / ss_tot
    rmse = math.sqrt(ss_res / len(ys))
    return IsotonicFit(thresholds=grouped_x, values=fitted, r2=r2, rmse=rmse,
                       degenerate=degenerate)


# ---------------------------------------------------------------------------
# Cross-model agreement

DEFAULT_SEVERITY_BUCKETS: tuple[tuple[float, float], ...] = (
    (0.0, 0.2), (0.2, 0.4), (0.4, 0.6), (0.6, 0.8), (0.8, 1.0),
)


def _bucket_of(s: float, buckets) -> int | None:
    for k, (lo, hi) in enumerate(buckets):
        last = k == len(buckets) - 1
        if lo <= s < hi or (last and s == hi):
            return k
    return None


def cross_model_agreement(scores: dict[str, dict[tuple[str, float], float]],
                          buckets=DEFAULT_SEVERITY_BUCKETS,
                          min_shared: int = 3) -> dict[tuple[str, str], dict]:
    """Pairwise mean per-bucket Spearman agreement between judge models.

    ``scores`` maps model -> {(slide_id, severity): y*}. For each model pair
    and severity bucket, Spearman is computed over shared slides; buckets
    with fewer than ``min_shared`` shared slides are skipped and counted.
    """
    models = sorted(scores)
    if len(models) < 2:
        raise NoSharedSlides("need at least 2 models")
    out: dict[tuple[str, str], dict] = {}
    for i, m1 in enumerate(models):
        for m2 in models[i + 1:]:
            shared = set(scores[m1]) & set(scores[m2])
            if not shared:
                raise NoSharedSlides(f"{m1} vs {m2}")
            per_bucket: list[float] = []
            skipped = 0
            for k in range(len(buckets)):
                keys = sorted(kk for kk in shared if _bucket_of(kk[1], buckets) == k)
                if len(keys) < min_shared:
                    skipped += 1
                    continue
                a = [scores[m1][kk] for kk in keys]
                b = [scores[m2][kk] for kk in keys]
                rho = stats.spearmanr(a, b).statistic
                if math.isnan(rho):
                    # Constant scores carry no rank signal in this bucket.
                    skipped += 1
                    continue
                per_bucket.append(float(rho))
            out[(m1, m2)] = {
                "mean_rho": float(np.mean(per_bucket)) if per_bucket else math.nan,
                "buckets_used": len(per_bucket),
                "buckets_skipped": skipped,
            }
    return out
