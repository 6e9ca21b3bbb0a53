import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slideval.analytics import (
    InvalidPermutation,
    IsotonicFit,
    JudgeSeries,
    NoSharedSlides,
    OutOfScale,
    TooFewPoints,
    cross_model_agreement,
    fidelity,
    isotonic_fit,
    mace,
    normalize_score,
    pava,
    poa_adjacent,
    rank_metrics,
)

GRID = [round(0.1 * k, 1) for k in range(11)]


def series(points, scale=(1, 100)):
    return JudgeSeries(slide_id="s", axis="geometry", scale=scale,
                       points=list(points))


class TestNormalizeScore:
    def test_endpoints(self):
        assert normalize_score(5, (1, 5)) == 0.0
        assert normalize_score(1, (1, 5)) == 1.0

    def test_midpoint(self):
        assert normalize_score(3, (1, 5)) == 0.5

    def test_out_of_scale(self):
        with pytest.raises(OutOfScale):
            normalize_score(0, (1, 5))
        with pytest.raises(OutOfScale):
            normalize_score(101, (1, 100))

    def test_order_reversing(self):
        raws = [1, 2, 3, 4, 5]
        ys = [normalize_score(r, (1, 5)) for r in raws]
        assert ys == sorted(ys, reverse=True)


class TestPOA:
    def test_perfectly_monotone_judge(self):
        s = series([(x, 100 - 99 * x) for x in GRID])
        assert poa_adjacent(s) == 1.0

    def test_ties_count_as_agreement(self):
        s = series([(0.0, 50), (0.5, 50), (1.0, 50)])
        assert poa_adjacent(s) == 1.0

    def test_single_violation(self):
        s = series([(0.0, 100), (0.5, 40), (1.0, 60)])  # y* dips at the last step
        assert poa_adjacent(s) == pytest.approx(0.5)

    def test_invariant_under_monotone_transform(self):
        pts = [(x, 100 - 90 * x) for x in GRID]
        s1 = series(pts)
        # Strictly increasing transform of y* == strictly decreasing on raw.
        s2 = series([(x, (r / 100.0) ** 3 * 99 + 1) for x, r in pts])
        assert poa_adjacent(s1) == poa_adjacent(s2)

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            poa_adjacent(series([(0.0, 50)]))


class TestMACE:
    def test_identity_judge_zero(self):
        s = series([(x, 100 - 99 * x) for x in GRID])
        assert mace(s) == pytest.approx(0.0, abs=1e-12)

    def test_constant_judge_on_grid(self):
        # y* = 0.5 everywhere: mean|0.5 - s| over the 11-point grid = 3/11.
        s = series([(x, 50.5) for x in GRID], scale=(1, 100))
        assert mace(s) == pytest.approx(3.0 / 11.0)

    def test_hand_computed(self):
        s = series([(0.0, 5), (1.0, 5)], scale=(1, 5))
        # y* = 0 at both; errors 0 and 1 -> mean 0.5.
        assert mace(s) == pytest.approx(0.5)


class TestFidelity:
    def test_monotone_series(self):
        s = series([(x, 100 - 50 * x) for x in GRID])
        assert fidelity(s) == pytest.approx(1.0)

    def test_anti_monotone(self):
        s = series([(x, 1 + 50 * x) for x in GRID])
        assert fidelity(s) == pytest.approx(-1.0)

    def test_constant_series_zero(self):
        assert fidelity(series([(x, 50) for x in GRID])) == 0.0


def brute_force_tau_rho(pred, truth):
    n = len(truth)
    # Kendall tau-b by pair counting with tie corrections.
    conc = disc = ties_x = ties_y = 0
    for (i, j) in itertools.combinations(range(n), 2):
        dx = truth[i] - truth[j]
        dy = pred[i] - pred[j]
        if dx == 0 and dy == 0:
            ties_x += 1
            ties_y += 1
        elif dx == 0:
            ties_x += 1
        elif dy == 0:
            ties_y += 1
        elif dx * dy > 0:
            conc += 1
        else:
            disc += 1
    n0 = n * (n - 1) / 2
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    tau = (conc - disc) / denom if denom else math.nan

    def avg_ranks(xs):
        order = sorted(range(n), key=lambda k: xs[k])
        ranks = [0.0] * n
        i = 0
        while i < n:
            j = i
            while j < n and xs[order[j]] == xs[order[i]]:
                j += 1
            r = (i + j - 1) / 2.0 + 1.0
            for k in range(i, j):
                ranks[order[k]] = r
            i = j
        return ranks

    ra, rb = avg_ranks(truth), avg_ranks(pred)
    ma, mb = sum(ra) / n, sum(rb) / n
    num = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    den = math.sqrt(sum((x - ma) ** 2 for x in ra) * sum((y - mb) ** 2 for y in rb))
    rho = num / den if den else math.nan
    return tau, rho


class TestRankMetrics:
    def test_identity(self):
        r = rank_metrics([0, 1, 2, 3], [0, 1, 2, 3])
        assert r.kendall_tau == pytest.approx(1.0)
        assert r.spearman_rho == pytest.approx(1.0)
        assert r.exact_match == 1.0
        assert r.length_ratio == 1.0

    def test_reversal(self):
        r = rank_metrics([3, 2, 1, 0], [0, 1, 2, 3])
        assert r.kendall_tau == pytest.approx(-1.0)
        assert r.spearman_rho == pytest.approx(-1.0)
        assert r.exact_match == 0.0

    def test_exhaustive_against_pair_counting(self):
        truth = [0, 1, 2, 3, 4]
        for perm in itertools.permutations(truth):
            r = rank_metrics(list(perm), truth)
            tau, rho = brute_force_tau_rho(list(perm), truth)
            assert r.kendall_tau == pytest.approx(tau, abs=1e-12)
            assert r.spearman_rho == pytest.approx(rho, abs=1e-12)
            assert r.exact_match == pytest.approx(
                sum(a == b for a, b in zip(perm, truth)) / 5)

    def test_truncated_reply_only_length_ratio(self):
        r = rank_metrics([0, 1, 2], list(range(10)))
        assert r.length_ratio == pytest.approx(0.3)
        assert not r.computable
        assert r.kendall_tau is None

    def test_duplicate_raises(self):
        with pytest.raises(InvalidPermutation):
            rank_metrics([0, 0, 1], [0, 1, 2])

    def test_position_shuffle_invariance(self, rng):
        # Reordering the (pred, truth) pairs jointly changes nothing: the
        # metrics depend on the pair set, not the listing order.
        truth = list(range(6))
        pred = list(rng.permutation(6))
        base = rank_metrics(pred, truth)
        order = list(rng.permutation(6))
        r2 = rank_metrics([pred[i] for i in order], [truth[i] for i in order])
        assert r2.kendall_tau == pytest.approx(base.kendall_tau)
        assert r2.spearman_rho == pytest.approx(base.spearman_rho)
        assert r2.exact_match == pytest.approx(base.exact_match)


def brute_force_isotonic(y, weights, grid_steps=120):
    """Grid search over monotone sequences drawn from a fine value grid."""
    lo, hi = min(y), max(y)
    if lo == hi:
        return list(y)
    grid = [lo + (hi - lo) * k / grid_steps for k in range(grid_steps + 1)]
    n = len(y)
    best, best_cost = None, math.inf

    def rec(i, floor_idx, current, cost):
        nonlocal best, best_cost
        if cost >= best_cost:
            return
        if i == n:
            best, best_cost = list(current), cost
            return
        for gi in range(floor_idx, len(grid)):
            v = grid[gi]
            c = cost + weights[i] * (y[i] - v) ** 2
            if c < best_cost:
                current.append(v)
                rec(i + 1, gi, current, c)
                current.pop()

    rec(0, 0, [], 0.0)
    return best


class TestPAVA:
    def test_already_monotone_identity(self):
        y = [1.0, 2.0, 2.0, 5.0]
        assert pava(y) == y

    def test_three_one_two(self):
        assert pava([3.0, 1.0, 2.0]) == [2.0, 2.0, 2.0]

    def test_one_three_two(self):
        assert pava([1.0, 3.0, 2.0]) == [1.0, 2.5, 2.5]

    def test_weighted_pooling(self):
        # Pool (3, w=3) with (1, w=1): mean 2.5.
        assert pava([3.0, 1.0], weights=[3.0, 1.0]) == [2.5, 2.5]

    def test_output_monotone_and_mean_preserving(self, rng):
        for _ in range(100):
            y = list(rng.uniform(0, 1, size=int(rng.integers(2, 9))))
            out = pava(y)
            assert all(a <= b + 1e-12 for a, b in zip(out, out[1:]))
            assert sum(out) == pytest.approx(sum(y))

    def test_matches_brute_force_grid_search(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 6))
            y = [round(float(v), 2) for v in rng.uniform(0, 1, size=n)]
            w = [1.0] * n
            out = pava(y, w)
            ref = brute_force_isotonic(y, w)
            cost_out = sum(wi * (yi - oi) ** 2 for wi, yi, oi in zip(w, y, out))
            cost_ref = sum(wi * (yi - ri) ** 2 for wi, yi, ri in zip(w, y, ref))
            # The exact optimum may fall between grid points; PAVA must not
            # be worse than the best grid sequence.
            assert cost_out <= cost_ref + 1e-6


class TestIsotonicFit:
    def test_monotone_data_perfect_fit(self):
        fit = isotonic_fit([0.0, 0.3, 0.7, 1.0], [0.1, 0.2, 0.8, 0.9])
        assert fit.r2 == pytest.approx(1.0)
        assert fit.rmse == pytest.approx(0.0, abs=1e-12)
        assert not fit.degenerate

    def test_tied_x_pooled(self):
        fit = isotonic_fit([0.0, 0.0, 1.0], [0.2, 0.4, 0.9])
        assert fit.thresholds == [0.0, 1.0]
        assert fit.values[0] == pytest.approx(0.3)

    def test_constant_y_degenerate(self):
        fit = isotonic_fit([0.0, 0.5, 1.0], [0.4, 0.4, 0.4])
        assert fit.degenerate and fit.r2 == 0.0

    def test_predict_step_lookup(self):
        fit = isotonic_fit([0.0, 1.0], [0.2, 0.8])
        assert fit.predict(-5.0) == 0.2
        assert fit.predict(0.5) == 0.2
        assert fit.predict(2.0) == 0.8

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            isotonic_fit([1.0], [1.0])

    def test_fitted_values_non_decreasing(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 10))
            fit = isotonic_fit(list(rng.uniform(0, 1, size=n)),
                               list(rng.uniform(0, 1, size=n)))
            assert all(a <= b + 1e-12 for a, b in zip(fit.values, fit.values[1:]))


class TestCrossModelAgreement:
    def _scores(self, fn, slides=6):
        out = {}
        for i in range(slides):
            for s in GRID:
                out[(f"slide{i}", s)] = fn(i, s)
        return out

    def test_self_agreement(self):
        a = self._scores(lambda i, s: (i + 1) * s / 10 + 0.01 * i)
        result = cross_model_agreement({"m1": a, "m2": dict(a)})
        assert result[("m1", "m2")]["mean_rho"] == pytest.approx(1.0)

    def test_negation_anti_agreement(self):
        # Exact negation preserves tie structure (1.0 - v would merge
        # nearly-equal floats into spurious ties on one side only).
        a = self._scores(lambda i, s: min(1.0, s * 0.5 + 0.05 * i))
        b = {k: -v for k, v in a.items()}
        result = cross_model_agreement({"m1": a, "m2": b})
        assert result[("m1", "m2")]["mean_rho"] == pytest.approx(-1.0)

    def test_one_rank_swap_closed_form(self):
        # 4 slides in one bucket: ranks {1,2,3,4} vs {1,3,2,4} -> rho 0.8.
        a = {(f"s{i}", 0.1): [0.1, 0.2, 0.3, 0.4][i] for i in range(4)}
        b = {(f"s{i}", 0.1): [0.1, 0.3, 0.2, 0.4][i] for i in range(4)}
        result = cross_model_agreement({"m1": a, "m2": b})
        assert result[("m1", "m2")]["mean_rho"] == pytest.approx(0.8)
        assert result[("m1", "m2")]["buckets_used"] == 1

    def test_small_buckets_skipped(self):
        a = {("s0", 0.1): 0.1, ("s1", 0.1): 0.2}  # only 2 shared in bucket
        b = dict(a)
        result = cross_model_agreement({"m1": a, "m2": b})
        assert result[("m1", "m2")]["buckets_used"] == 0
        assert math.isnan(result[("m1", "m2")]["mean_rho"])

    def test_single_model_raises(self):
        with pytest.raises(NoSharedSlides):
            cross_model_agreement({"m1": {("s", 0.1): 0.5}})

    def test_disjoint_slides_raise(self):
        with pytest.raises(NoSharedSlides):
            cross_model_agreement({"m1": {("a", 0.1): 0.5},
                                   "m2": {("b", 0.1): 0.5}})


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=12))
def test_pava_idempotent(y):
    once = pava(y)
    assert pava(once) == pytest.approx(once)
