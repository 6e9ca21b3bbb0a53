"""End-to-end acceptance gate for the evaluation toolkit.

Each test pins one externally checkable guarantee: assignment optimality,
gate bookkeeping, color-difference conformance, perturbation determinism and
monotonicity, suite cardinality, oracle/jitter pipeline behavior, rank and
isotonic oracles, judge calibration, parseability accounting, and a fully
offline byte-reproducible pipeline run. The final test exercises a live
endpoint and runs only when one is configured via environment variables.
"""

import itertools
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from conftest import make_rect, make_text, random_slide
from slideval.analytics import JudgeSeries, mace, pava, poa_adjacent, rank_metrics
from slideval.color import delta_e2000_lab
from slideval.matching import MatchConfig, blended_cost, match_family, match_slides
from slideval.metrics import PRF1Counters, micro_prf1
from slideval.perturb import (
    AXES,
    DEFAULT_SEVERITY_GRID,
    PARAM_FUNCS,
    PerturbationConfig,
    perturb,
    synthesize_suite,
)
from slideval.pipeline import (
    Pipeline,
    RunConfig,
    seed_extraction_cache,
    seed_judge_cache,
    seed_order_cache,
)
from slideval.schema import BoxGeometry, Slide, slide_to_json
from test_analytics import brute_force_tau_rho
from test_color import VERIFICATION_PAIRS

GRID = tuple(round(0.1 * k, 1) for k in range(11))


def random_instance(rng, family: str, m: int, n: int):
    """Two random same-family element lists with overlapping geometry."""
    def element():
        x, y = rng.uniform(0, 700), rng.uniform(0, 400)
        w, h = rng.uniform(20, 260), rng.uniform(20, 140)
        if family == "text":
            words = ["alpha", "beta", "gamma", "delta", "total"]
            content = " ".join(rng.choice(words, size=rng.integers(1, 4)))
            return make_text(x=x, y=y, w=w, h=h, content=content)
        return make_rect(x=x, y=y, w=w, h=h)

    return [element() for _ in range(m)], [element() for _ in range(n)]


class TestAssignmentOptimality:
    def test_500_random_instances_match_exhaustive_minimum(self):
        rng = np.random.default_rng(11)
        cfg = MatchConfig()
        start = time.monotonic()
        for trial in range(500):
            family = ("rect", "text")[trial % 2]
            m, n = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            gts, preds = random_instance(rng, family, m, n)
            size = max(m, n)
            pad = cfg.tau + 1.0
            cost = np.full((size, size), pad)
            for i, g in enumerate(gts):
                for j, p in enumerate(preds):
                    cost[i, j] = blended_cost(g, p, cfg)
            best = min(sum(cost[i, perm[i]] for i in range(size))
                       for perm in itertools.permutations(range(size)))
            result = match_family(gts, preds, cfg)
            # The solver minimizes over the identical padded matrix, so its
            # optimum must equal the exhaustive-permutation minimum; the
            # accepted matches are the sub-threshold part of that optimum.
            from scipy.optimize import linear_sum_assignment

            r, c = linear_sum_assignment(cost)
            solver_total = float(cost[r, c].sum())
            assert solver_total == pytest.approx(best, abs=1e-9)
            accepted = sum(c_ij for _, _, c_ij in result.matches)
            assert accepted <= solver_total + 1e-9
        assert time.monotonic() - start < 10.0


class TestGateBookkeeping:
    def test_partition_on_randomized_instances(self):
        rng = np.random.default_rng(22)
        cfg = MatchConfig()
        for trial in range(200):
            family = ("rect", "text")[trial % 2]
            m, n = int(rng.integers(0, 7)), int(rng.integers(0, 7))
            gts, preds = random_instance(rng, family, m, n)
            result = match_family(gts, preds, cfg)
            g_used = [i for i, _, _ in result.matches] + result.false_negatives
            p_used = [j for _, j, _ in result.matches] + result.false_positives
            assert sorted(g_used) == list(range(m))
            assert sorted(p_used) == list(range(n))
            for _, _, c in result.matches:
                assert c <= cfg.tau

    def test_rejected_pair_becomes_one_fp_and_one_fn(self):
        g = [make_rect(x=0, y=0, w=50, h=50)]
        p = [make_rect(x=800, y=400, w=50, h=50)]
        result = match_family(g, p, MatchConfig())
        assert result.matches == []
        assert result.false_negatives == [0]
        assert result.false_positives == [0]


class TestColorDifferenceConformance:
    def test_published_verification_pairs(self):
        for lab1, lab2, expected in VERIFICATION_PAIRS:
            assert delta_e2000_lab(lab1, lab2) == pytest.approx(expected, abs=1e-4)

    def test_black_vs_white_exact(self):
        from slideval.color import delta_e2000

        assert delta_e2000("#000000", "#FFFFFF") == pytest.approx(100.0, abs=1e-9)


@pytest.fixture(scope="module")
def seed_slides():
    rng = np.random.default_rng(33)
    return [random_slide(rng, slide_id=f"seed#{k}") for k in range(50)]


class TestPerturbationDeterminism:
    @pytest.mark.parametrize("axis", AXES)
    def test_severity_zero_is_identity_on_50_slides(self, axis, seed_slides):
        for slide in seed_slides:
            out, record = perturb(slide, axis, 0.0)
            assert slide_to_json(out) == slide_to_json(slide)
            assert record.events == []

    @pytest.mark.parametrize("axis", AXES)
    def test_reruns_byte_identical_on_50_slides(self, axis, seed_slides):
        for slide in seed_slides:
            a, ra = perturb(slide, axis, 0.6)
            b, rb = perturb(slide, axis, 0.6)
            assert slide_to_json(a) == slide_to_json(b)
            assert ra.to_json() == rb.to_json()


class TestParameterMonotonicity:
    def test_all_closed_form_parameters_non_decreasing(self):
        for name, fn in PARAM_FUNCS.items():
            values = [fn(s) for s in GRID]
            assert all(lo <= hi + 1e-12 for lo, hi in zip(values, values[1:])), name


class TestSuiteCardinality:
    def test_234_seeds_synthesize_7722_variants(self, tmp_path):
        rng = np.random.default_rng(44)
        seeds = [random_slide(rng, slide_id=f"deck{k // 8}#{k % 8}",
                              max_per_family=2) for k in range(234)]
        start = time.monotonic()
        rows = synthesize_suite(seeds, tmp_path, severities=DEFAULT_SEVERITY_GRID)
        elapsed = time.monotonic() - start
        assert len(rows) == 234 * 3 * 11 == 7722
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert len(manifest) == 7722
        assert elapsed < 300.0


@pytest.fixture(scope="module")
def metrics(tmp_path_factory, fixture_corpus):
    cfg = RunConfig(corpus=str(fixture_corpus),
                    output_root=str(tmp_path_factory.mktemp("oracle")),
                    run_id="oracle", predictor="oracle", n_runs=2)
    pipe = Pipeline(cfg)
    pipe.run(stages=("ingest", "extract", "match", "score"))
    return json.loads((pipe.stage_dir("score") / "metrics.json").read_text())


class TestOraclePredictorPipeline:
    def test_matching_f1_and_coverage_perfect(self, metrics):
        for fam, modes in metrics["families"].items():
            for mode in ("e2e", "parsed"):
                assert modes[mode]["f1"] == 1.0, (fam, mode)
                assert modes[mode]["coverage"] == 1.0, (fam, mode)
                assert modes[mode]["fp"] == 0 and modes[mode]["fn"] == 0

    def test_text_content_f1_perfect(self, metrics):
        assert metrics["text_content_f1"]["e2e"] == 1.0
        assert metrics["text_content_f1"]["parsed"] == 1.0

    def test_all_error_terms_zero(self, metrics):
        exact_hits = ("content_sim", "font_family_hit", "font_group_hit")
        for name, st in metrics["terms"].items():
            expected = 1.0 if name.endswith(exact_hits) else 0.0
            assert st["mean"] == pytest.approx(expected, abs=1e-12), name

    def test_parse_rate_one(self, metrics):
        assert metrics["parse_rate"] == 1.0


class TestJitterDegradation:
    def test_f1_decreases_with_severity(self):
        rng = np.random.default_rng(55)
        slides = [random_slide(rng, slide_id=f"jit#{k}") for k in range(24)]
        cfg = PerturbationConfig(base_seed=99)
        mean_f1 = []
        for s in GRID:
            counters = PRF1Counters()
            for slide in slides:
                pred = slide
                for axis in AXES:
                    pred, _ = perturb(pred, axis, s, cfg)
                for result in match_slides(slide, pred, MatchConfig()).values():
                    counters.add(tp=result.tp,
                                 fp=len(result.false_positives),
                                 fn=len(result.false_negatives))
            mean_f1.append(micro_prf1(counters)[2])
        assert mean_f1[0] == 1.0
        rho = stats.spearmanr(GRID, mean_f1).statistic
        assert rho <= -0.8, (mean_f1, rho)


class TestRankMetricOracle:
    def test_exhaustive_agreement_up_to_n6(self):
        for n in range(2, 7):
            truth = list(range(n))
            for perm in itertools.permutations(truth):
                pred = list(perm)
                result = rank_metrics(pred, truth)
                tau, rho = brute_force_tau_rho(pred, truth)
                assert result.kendall_tau == pytest.approx(tau, abs=1e-12)
                assert result.spearman_rho == pytest.approx(rho, abs=1e-12)
                exact = sum(a == b for a, b in zip(pred, truth)) / n
                assert result.exact_match == pytest.approx(exact)

    def test_identity_and_reversal(self):
        truth = [0, 1, 2, 3, 4]
        assert rank_metrics(truth, truth).kendall_tau == pytest.approx(1.0)
        assert rank_metrics(truth[::-1], truth).kendall_tau == pytest.approx(-1.0)
        assert rank_metrics(truth[::-1], truth).spearman_rho == pytest.approx(-1.0)


def exact_monotone_least_squares(y: list[float]) -> list[float]:
    """Exhaustive monotone least-squares fit.

    Enumerates every partition of the sequence into consecutive blocks whose
    means are non-decreasing (the optimal fit always has this shape) and
    keeps the partition with minimal squared error.
    """
    n = len(y)
    best, best_cost = None, math.inf
    for mask in range(1 << (n - 1)):
        bounds = [0] + [i + 1 for i in range(n - 1) if mask >> i & 1] + [n]
        means = []
        cost = 0.0
        for lo, hi in zip(bounds, bounds[1:]):
            block = y[lo:hi]
            m = sum(block) / len(block)
            means.append((m, hi - lo))
            cost += sum((v - m) ** 2 for v in block)
        if any(a[0] > b[0] for a, b in zip(means, means[1:])):
            continue
        if cost < best_cost:
            best_cost = cost
            best = [m for m, count in means for _ in range(count)]
    return best


class TestIsotonicOracle:
    def test_pava_equals_exhaustive_on_200_random_sequences(self):
        rng = np.random.default_rng(66)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            y = [float(v) for v in rng.uniform(-1, 1, size=n)]
            fitted = pava(y)
            expected = exact_monotone_least_squares(y)
            assert fitted == pytest.approx(expected, abs=1e-6)
            # Non-decreasing and mean-preserving.
            assert all(a <= b + 1e-12 for a, b in zip(fitted, fitted[1:]))
            assert sum(fitted) / n == pytest.approx(sum(y) / n)


class TestJudgeCalibration:
    def _series(self, raw_fn, scale):
        return JudgeSeries(slide_id="s", axis="geometry", scale=scale,
                           points=[(s, raw_fn(s)) for s in GRID])

    def test_identity_judge(self):
        js = self._series(lambda s: 1.0 - s, (0.0, 1.0))
        assert poa_adjacent(js) == 1.0
        assert mace(js) == pytest.approx(0.0, abs=1e-12)

    def test_constant_judge_on_11_point_grid(self):
        js = self._series(lambda s: 50.5, (1, 100))
        assert mace(js) == pytest.approx(3.0 / 11.0)


def fabricate_ingest(pipe: Pipeline, slides: list[Slide]) -> None:
    """Write an ingest stage directly from in-memory slides."""
    d = pipe.stage_dir("ingest")
    (d / "slides").mkdir(parents=True, exist_ok=True)
    from slideval.pipeline import _safe

    for s in slides:
        (d / "slides" / f"{_safe(s.slide_id)}.json").write_text(slide_to_json(s))
    (d / "manifest.json").write_text(json.dumps(
        {"decks": [], "slide_ids": [s.slide_id for s in slides]}))


class TestParseabilityAccounting:
    def test_planted_failure_fractions_and_e2e_denominators(self, tmp_path):
        # Bin (0,1]: four single-text slides, one planted failure -> 3/4.
        # Bin (1,2]: two two-text slides, one planted failure -> 1/2.
        slides = []
        for k in range(4):
            slides.append(Slide(slide_id=f"one#{k}",
                                texts=[make_text(content=f"solo {k}")]))
        for k in range(2):
            slides.append(Slide(slide_id=f"two#{k}",
                                texts=[make_text(content=f"first {k}"),
                                       make_text(y=200, content=f"second {k}")]))
        failing = {"one#3", "two#1"}

        from slideval.gateway import oracle_extraction_response

        cache = tmp_path / "cache"
        seed_extraction_cache(
            slides, cache,
            responder=lambda s: ("this is not machine readable"
                                 if s.slide_id in failing
                                 else oracle_extraction_response(s)))

        cfg = RunConfig(corpus="", output_root=str(tmp_path / "runs"),
                        run_id="acct", predictor=f"replay:{cache}", n_runs=1)
        pipe = Pipeline(cfg)
        fabricate_ingest(pipe, slides)
        pipe.run(stages=("extract", "match", "score"))
        metrics = json.loads((pipe.stage_dir("score") / "metrics.json").read_text())

        by_bin = {tuple(r["bin"]): r for r in metrics["parseability"]}
        assert by_bin[(0, 1)]["rate"] == 0.75 and by_bin[(0, 1)]["n"] == 4
        assert by_bin[(1, 2)]["rate"] == 0.5 and by_bin[(1, 2)]["n"] == 2

        e2e = metrics["families"]["text"]["e2e"]
        parsed = metrics["families"]["text"]["parsed"]
        # The failed slides hold 1 + 2 ground-truth texts: e2e counts them
        # as misses, parsed-only drops them from the denominator.
        assert parsed["fp"] == parsed["fn"] == 0
        assert e2e["fn"] == 3 and e2e["fp"] == 0
        assert e2e["tp"] == parsed["tp"] == 5
        assert parsed["recall"] == 1.0
        assert e2e["recall"] == pytest.approx(5 / 8)


class TestHermeticReproducibility:
    def _full_run(self, root: Path, cache: Path, fixture_corpus) -> Path:
        cfg = RunConfig(corpus=str(fixture_corpus), output_root=str(root),
                        run_id="full", severities=(0.0, 0.5, 1.0), n_runs=2,
                        max_per_cell=3, predictor=f"replay:{cache}",
                        judge_source=f"replay:{cache}",
                        order_source=f"replay:{cache}")
        pipe = Pipeline(cfg)
        pipe.stage_ingest()
        pipe.stage_perturb()
        if not any(cache.glob("*.txt")):
            slides = pipe.load_slides()
            seed_extraction_cache(slides, cache)
            rows = json.loads(
                (pipe.stage_dir("perturb") / "manifest.json").read_text())
            seed_judge_cache(rows, cache)
            seed_order_cache(slides, cache, base_seed=cfg.base_seed)
        pipe.run()
        return pipe.run_dir

    def test_two_runs_byte_identical_under_five_minutes(self, tmp_path,
                                                        fixture_corpus):
        cache = tmp_path / "cache"
        start = time.monotonic()
        run_a = self._full_run(tmp_path / "a", cache, fixture_corpus)
        elapsed = time.monotonic() - start
        assert elapsed < 300.0
        run_b = self._full_run(tmp_path / "b", cache, fixture_corpus)

        files_a = sorted(p.relative_to(run_a) for p in run_a.rglob("*")
                         if p.is_file())
        files_b = sorted(p.relative_to(run_b) for p in run_b.rglob("*")
                         if p.is_file())
        assert files_a == files_b
        root_a, root_b = str(run_a.parent).encode(), str(run_b.parent).encode()
        for rel in files_a:
            data_a = (run_a / rel).read_bytes().replace(root_a, b"<root>")
            data_b = (run_b / rel).read_bytes().replace(root_b, b"<root>")
            assert data_a == data_b, rel

        report = (run_a / "report" / "report.txt").read_text()
        assert "matching (e2e / parsed-only)" in report
        assert "judge sensitivity" in report
        assert "ordering summary" in report


LIVE_URL = os.environ.get("SLIDEVAL_LIVE_BASE_URL", "")
LIVE_MODEL = os.environ.get("SLIDEVAL_LIVE_MODEL", "")


@pytest.mark.skipif(not (LIVE_URL and LIVE_MODEL),
                    reason="set SLIDEVAL_LIVE_BASE_URL and SLIDEVAL_LIVE_MODEL "
                           "(plus SLIDEVAL_LIVE_API_KEY) to run live checks")
class TestLiveEndpoint:
    def test_ten_slide_live_extraction_run(self):
        from slideval import gateway
        from slideval.pipeline import aggregate_metrics
        from slideval.render import png_bytes

        rng = np.random.default_rng(77)
        slides = [random_slide(rng, slide_id=f"live#{k}") for k in range(10)]
        endpoint = gateway.ModelEndpoint(
            base_url=LIVE_URL, model=LIVE_MODEL,
            credential_env="SLIDEVAL_LIVE_API_KEY")
        transport = gateway.HttpTransport(endpoint)
        results = []
        for slide in slides:
            rec = gateway.request_extraction(transport, png_bytes(slide),
                                             slide.slide_id, n_runs=1,
                                             model=LIVE_MODEL)[0]
            entry = {"slide_id": slide.slide_id, "run": 0,
                     "status": rec.status,
                     "complexity": len(slide.elements())}
            if rec.status == "ok":
                from slideval.schema import slide_to_doc

                doc = slide_to_doc(rec.parsed)
                doc.pop("id", None)
                match = match_slides(slide, rec.parsed, MatchConfig())
                entry["families"] = {
                    fam: {"matches": r.matches,
                          "false_positives": r.false_positives,
                          "false_negatives": r.false_negatives}
                    for fam, r in match.items()}
                entry["prediction"] = doc
            results.append(entry)

        statuses = [r["status"] for r in results]
        assert len(statuses) == 10
        assert all(s in ("ok", "parse_failure", "transport_failure")
                   for s in statuses)
        metrics = aggregate_metrics({s.slide_id: s for s in slides},
                                    results, MatchConfig())
        assert set(metrics["families"]) >= {"text", "rect", "overall"}
        assert 0.0 <= metrics["parse_rate"] <= 1.0
