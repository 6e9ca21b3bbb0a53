"""Run orchestration: ingest -> render -> perturb -> (extract|judge|order)
-> match -> score -> analyze -> report, with a persistent run directory.

Each stage writes its outputs plus a manifest under
``<output_root>/<run_id>/<stage>/``; a completed stage is a no-op on re-run
unless forced. Runs driven by synthetic predictors or the replay transport
are fully offline and byte-reproducible from (config, corpus, canned
responses).
"""

from __future__ import annotations

import dataclasses
import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gateway
from .analytics import (
    JudgeSeries,
    cross_model_agreement,
    fidelity,
    isotonic_fit,
    mace,
    normalize_score,
    poa_adjacent,
    rank_metrics,
)
from .ingest import extract_deck
from .matching import FAMILIES, MatchConfig, match_slides
from .metrics import (
    PRF1Counters,
    micro_prf1,
    pair_metrics,
    parseability_curve,
)
from .perturb import (
    AXES,
    DEFAULT_SEVERITY_GRID,
    PerturbationConfig,
    derive_seed,
    make_rng,
    perturb,
    synthesize_suite,
)
from .render import png_bytes, rasterize_deck
from .schema import Slide, complexity, slide_from_json, slide_to_doc, slide_to_json

SCHEMA_VERSION = 1

STAGES = ("ingest", "render", "perturb", "extract", "judge", "order",
          "match", "score", "analyze", "report")

JUDGE_SCALES = ((1, 5), (1, 100))


class MissingStage(RuntimeError):
    pass


@dataclass
class RunConfig:
    corpus: str = ""
    output_root: str = "runs"
    run_id: str = "run"
    base_seed: int = 0
    n_runs: int = 3
    workers: int = 4
    strict_ingest: bool = False
    severities: tuple[float, ...] = DEFAULT_SEVERITY_GRID
    axes: tuple[str, ...] = AXES
    max_per_cell: int | None = 50
    predictor: str = "oracle"  # oracle | empty | jittered:<s> | replay:<dir> | live
    judge_source: str = ""     # replay:<dir> | live; empty disables the stage
    order_source: str = ""
    endpoint: dict = field(default_factory=dict)  # ModelEndpoint fields for live mode
    match: dict = field(default_factory=dict)     # MatchConfig overrides
    perturb: dict = field(default_factory=dict)   # PerturbationConfig overrides

    def match_config(self) -> MatchConfig:
        return MatchConfig(**self.match)

    def perturb_config(self) -> PerturbationConfig:
        return PerturbationConfig(base_seed=self.base_seed, **self.perturb)

    @classmethod
    def from_file(cls, path: Path | str) -> "RunConfig":
        import yaml

        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        known = {f.name for f in dataclasses.fields(cls)}
        cfg = cls(**{k: v for k, v in data.items() if k in known})
        cfg.severities = tuple(cfg.severities)
        cfg.axes = tuple(cfg.axes)
        return cfg


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True),
                    encoding="utf-8")


class Pipeline:
    def __init__(self, config: RunConfig):
        self.config = config
        self.run_dir = Path(config.output_root) / config.run_id
        self.run_dir.mkdir(parents=True, exist_ok=True)
        _write_json(self.run_dir / "config.json",
                    {"schema_version": SCHEMA_VERSION,
                     **dataclasses.asdict(config)})

    # -- plumbing -----------------------------------------------------------

    def stage_dir(self, stage: str) -> Path:
        return self.run_dir / stage

    def _done(self, stage: str) -> bool:
        return (self.stage_dir(stage) / "manifest.json").exists()

    def _require(self, stage: str) -> Path:
        if not self._done(stage):
            raise MissingStage(stage)
        return self.stage_dir(stage)

    def _start(self, stage: str, force: bool) -> Path | None:
        d = self.stage_dir(stage)
        if self._done(stage) and not force:
            return None
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
        return d

    def load_slides(self) -> list[Slide]:
        d = self._require("ingest")
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        out = []
        for sid in manifest["slide_ids"]:
            out.append(slide_from_json(
                (d / "slides" / f"{_safe(sid)}.json").read_text(encoding="utf-8")))
            out[-1].slide_id = sid
        return out

    # -- stages -------------------------------------------------------------

    def run(self, stages=STAGES, force: bool = False) -> Path:
        for stage in stages:
            getattr(self, f"stage_{stage}")(force=force)
        return self.run_dir

    def stage_ingest(self, force: bool = False) -> None:
        d = self._start("ingest", force)
        if d is None:
            return
        (d / "slides").mkdir()
        decks = []
        slide_ids = []
        for path in sorted(Path(self.config.corpus).glob("*.pptx")):
            deck, slides = extract_deck(path, strict=self.config.strict_ingest)
            for slide in slides:
                (d / "slides" / f"{_safe(slide.slide_id)}.json").write_text(
                    slide_to_json(slide), encoding="utf-8")
                slide_ids.append(slide.slide_id)
            decks.append({"deck_id": deck.deck_id,
                          "slide_count": deck.slide_count,
                          "emu_width": deck.emu_width,
                          "emu_height": deck.emu_height,
                          "warnings": deck.warnings})
        _write_json(d / "manifest.json", {"decks": decks, "slide_ids": slide_ids})

    def stage_render(self, force: bool = False) -> None:
        d = self._start("render", force)
        if d is None:
            return
        rasterize_deck(self.load_slides(), d)

    def stage_perturb(self, force: bool = False) -> None:
        d = self._start("perturb", force)
        if d is None:
            return
        synthesize_suite(self.load_slides(), d,
                         severities=self.config.severities,
                         axes=self.config.axes,
                         config=self.config.perturb_config(),
                         max_per_cell=self.config.max_per_cell)

    # Extraction ------------------------------------------------------------

    def _predict(self, slide: Slide, png: bytes) -> list[dict]:
        """n_runs prediction records for one slide, per the configured
        predictor."""
        cfg = self.config
        mode = cfg.predictor
        if mode == "oracle":
            raw = gateway.oracle_extraction_response(slide)
            return [{"status": "ok", "prediction": json.loads(raw)}
                    for _ in range(cfg.n_runs)]
        if mode == "empty":
            doc = slide_to_doc(Slide(slide_id=slide.slide_id))
            doc.pop("id", None)
            return [{"status": "ok", "prediction": doc} for _ in range(cfg.n_runs)]
        if mode.startswith("jittered"):
            s = float(mode.split(":", 1)[1]) if ":" in mode else 0.3
            out = []
            for run in range(cfg.n_runs):
                jittered = slide.copy()
                for axis in cfg.axes:
                    seed = derive_seed(cfg.base_seed + run, slide.slide_id, axis, s)
                    from .perturb import _AXIS_FNS

                    jittered, _ = _AXIS_FNS[axis](jittered, s, make_rng(seed),
                                                  cfg.perturb_config())
                doc = slide_to_doc(jittered)
                doc.pop("id", None)
                out.append({"status": "ok", "prediction": doc})
            return out
        # replay:<dir> or live
        transport = self._transport(mode)
        records = gateway.request_extraction(
            transport, png, slide.slide_id, n_runs=cfg.n_runs,
            model=cfg.endpoint.get("model", ""),
            temperature=cfg.endpoint.get("temperature", 0.1))
        out = []
        for r in records:
            entry = {"status": r.status, "request_hash": r.request_hash}
            if r.status == "ok":
                entry["prediction"] = slide_to_doc(r.parsed)
                entry["prediction"].pop("id", None)
            out.append(entry)
        return out

    def _transport(self, mode: str):
        if mode.startswith("replay:"):
            return gateway.ReplayTransport(mode.split(":", 1)[1])
        if mode == "live":
            return gateway.HttpTransport(gateway.ModelEndpoint(**self.config.endpoint))
        raise ValueError(f"unknown source {mode!r}")

    def stage_extract(self, force: bool = False) -> None:
        d = self._start("extract", force)
        if d is None:
            return
        slides = self.load_slides()
        records = []
        for slide in slides:
            png = png_bytes(slide)
            for run, entry in enumerate(self._predict(slide, png)):
                records.append({"slide_id": slide.slide_id, "run": run,
                                "complexity": complexity(slide), **entry})
        _write_json(d / "records.json", records)
        _write_json(d / "manifest.json", {"n_records": len(records)})

    # Judging and ordering --------------------------------------------------

    def stage_judge(self, force: bool = False) -> None:
        d = self._start("judge", force)
        if d is None:
            return
        if not self.config.judge_source:
            _write_json(d / "manifest.json", {"skipped": True})
            return
        perturb_dir = self._require("perturb")
        manifest = json.loads((perturb_dir / "manifest.json").read_text(encoding="utf-8"))
        transport = self._transport(self.config.judge_source)
        model = self.config.endpoint.get("model", "judge")
        scores = []
        for row in manifest:
            slide = slide_from_json(Path(row["slide_path"]).read_text(encoding="utf-8"))
            png = png_bytes(slide)
            for scale in JUDGE_SCALES:
                rec = gateway.request_judge_score(
                    transport, png, row["slide_id"], row["axis"], scale,
                    model=model)
                scores.append({"slide_id": row["slide_id"], "axis": row["axis"],
                               "severity": row["severity"], "scale": list(scale),
                               "model": model, "status": rec.status,
                               "raw": rec.parsed if rec.status == "ok" else None})
        _write_json(d / "scores.json", scores)
        _write_json(d / "manifest.json", {"n_scores": len(scores)})

    def stage_order(self, force: bool = False) -> None:
        d = self._start("order", force)
        if d is None:
            return
        if not self.config.order_source:
            _write_json(d / "manifest.json", {"skipped": True})
            return
        slides = self.load_slides()
        decks: dict[str, list[Slide]] = {}
        for s in slides:
            decks.setdefault(s.slide_id.split("#")[0], []).append(s)
        transport = self._transport(self.config.order_source)
        results = []
        for deck_id, deck_slides in sorted(decks.items()):
            n = len(deck_slides)
            rng = make_rng(derive_seed(self.config.base_seed, deck_id, "order", 0.0))
            shuffle = list(rng.permutation(n))
            pngs = [png_bytes(deck_slides[i]) for i in shuffle]
            rec = gateway.request_ordering(transport, pngs, deck_id)
            # Truth: position of each original slide in the shuffled input.
            truth = [shuffle.index(i) for i in range(n)]
            results.append({"deck_id": deck_id, "n": n, "truth": truth,
                            "status": rec.status,
                            "predicted": rec.parsed if rec.status == "ok" else None})
        _write_json(d / "results.json", results)
        _write_json(d / "manifest.json", {"n_decks": len(results)})

    # Matching and metrics --------------------------------------------------

    def stage_match(self, force: bool = False) -> None:
        d = self._start("match", force)
        if d is None:
            return
        slides = {s.slide_id: s for s in self.load_slides()}
        records = json.loads(
            (self._require("extract") / "records.json").read_text(encoding="utf-8"))
        cfg = self.config.match_config()
        out = []
        for rec in records:
            entry = {"slide_id": rec["slide_id"], "run": rec["run"],
                     "status": rec["status"], "complexity": rec["complexity"]}
            if rec["status"] == "ok":
                gt = slides[rec["slide_id"]]
                pred = _doc_to_slide(rec["prediction"], rec["slide_id"])
                results = match_slides(gt, pred, cfg)
                entry["families"] = {
                    fam: {"matches": r.matches,
                          "false_positives": r.false_positives,
                          "false_negatives": r.false_negatives}
                    for fam, r in results.items()}
                entry["prediction"] = rec["prediction"]
            out.append(entry)
        _write_json(d / "results.json", out)
        _write_json(d / "manifest.json", {"n_results": len(out)})

    def stage_score(self, force: bool = False) -> None:
        d = self._start("score", force)
        if d is None:
            return
        slides = {s.slide_id: s for s in self.load_slides()}
        results = json.loads(
            (self._require("match") / "results.json").read_text(encoding="utf-8"))
        report = aggregate_metrics(slides, results, self.config.match_config())
        _write_json(d / "metrics.json", report)
        (d / "tables.tsv").write_text(metrics_table(report), encoding="utf-8")
        _write_json(d / "manifest.json", {"families": sorted(report["families"])})

    def stage_analyze(self, force: bool = False) -> None:
        d = self._start("analyze", force)
        if d is None:
            return
        out: dict = {"judge": None, "ordering": None}
        judge_dir = self.stage_dir("judge")
        if (judge_dir / "scores.json").exists():
            scores = json.loads((judge_dir / "scores.json").read_text(encoding="utf-8"))
            out["judge"] = analyze_judges(scores)
        order_dir = self.stage_dir("order")
        if (order_dir / "results.json").exists():
            results = json.loads((order_dir / "results.json").read_text(encoding="utf-8"))
            out["ordering"] = analyze_ordering(results)
        _write_json(d / "analytics.json", out)
        _write_json(d / "manifest.json", {"sections": [k for k, v in out.items() if v]})

    def stage_report(self, force: bool = False) -> None:
        d = self._start("report", force)
        if d is None:
            return
        metrics = json.loads(
            (self._require("score") / "metrics.json").read_text(encoding="utf-8"))
        analytics_path = self.stage_dir("analyze") / "analytics.json"
        analytics = (json.loads(analytics_path.read_text(encoding="utf-8"))
                     if analytics_path.exists() else {})
        text = render_report(metrics, analytics)
        (d / "report.txt").write_text(text, encoding="utf-8")
        _plot_report(d, metrics, analytics)
        _write_json(d / "manifest.json", {"files": sorted(p.name for p in d.iterdir()
                                                          if p.name != "manifest.json")})


def _safe(slide_id: str) -> str:
    return slide_id.replace("#", "_").replace("/", "_")


def _doc_to_slide(doc: dict, slide_id: str) -> Slide:
    from .schema import validate_slide

    return validate_slide(doc, slide_id=slide_id)


# ---------------------------------------------------------------------------
# Aggregation


def aggregate_metrics(slides: dict[str, Slide], match_results: list[dict],
                      cfg: MatchConfig) -> dict:
    """Pooled per-family metrics in end-to-end and parsed-only modes.

    End-to-end counts parse failures' ground-truth elements as false
    negatives; parsed-only excludes failed runs entirely. Coverage is the
    fraction of ground-truth instances that received a matched prediction
    under each mode's denominator.
    """
    counters = {mode: {fam: PRF1Counters() for fam in (*FAMILIES, "overall")}
                for mode in ("e2e", "parsed")}
    # Soft text-content counters: TP weighted by content similarity.
    content = {mode: {"tp": 0.0, "fp": 0, "fn": 0} for mode in ("e2e", "parsed")}
    terms: dict[str, list[float]] = {}
    parse_records = []

    def fam_elements(slide: Slide, fam: str) -> list:
        return {"text": slide.texts, "rect": slide.rects, "line": slide.lines,
                "image": slide.images, "table": slide.tables}[fam]

    for rec in match_results:
        gt = slides[rec["slide_id"]]
        parsed = rec["status"] == "ok"
        parse_records.append((rec["complexity"], parsed))
        if not parsed:
            # e2e: every ground-truth element of a failed run is a miss.
            for fam in FAMILIES:
                n = len(fam_elements(gt, fam))
                counters["e2e"][fam].add(fn=n)
                counters["e2e"]["overall"].add(fn=n)
                if fam == "text":
                    content["e2e"]["fn"] += n
            continue
        pred = _doc_to_slide(rec["prediction"], rec["slide_id"])
        for fam, r in rec["families"].items():
            tp, fp, fn = len(r["matches"]), len(r["false_positives"]), len(r["false_negatives"])
            for mode in ("e2e", "parsed"):
                counters[mode][fam].add(tp=tp, fp=fp, fn=fn)
                counters[mode]["overall"].add(tp=tp, fp=fp, fn=fn)
            g_elems = fam_elements(gt, fam)
            p_elems = fam_elements(pred, fam)
            for gi, pj, _cost in r["matches"]:
                pair = pair_metrics(g_elems[gi], p_elems[pj],
                                    background=gt.background,
                                    frame=cfg.frame, epsilon=cfg.epsilon)
                for name, value in pair.scalar_terms().items():
                    terms.setdefault(f"{fam}.{name}", []).append(value)
                if fam == "text":
                    sim = pair.content_sim or 0.0
                    for mode in ("e2e", "parsed"):
                        content[mode]["tp"] += sim
            if fam == "text":
                for mode in ("e2e", "parsed"):
                    content[mode]["fp"] += fp
                    content[mode]["fn"] += fn

    def prf(c: PRF1Counters) -> dict:
        p, r, f1 = micro_prf1(c)
        return {"tp": c.tp, "fp": c.fp, "fn": c.fn,
                "precision": p, "recall": r, "f1": f1,
                "coverage": c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0}

    def soft_f1(c: dict) -> float:
        p = c["tp"] / (c["tp"] + c["fp"]) if c["tp"] + c["fp"] else 0.0
        r = c["tp"] / (c["tp"] + c["fn"]) if c["tp"] + c["fn"] else 0.0
        return 2 * p * r / (p + r) if p + r else 0.0

    report = {
        "families": {fam: {mode: prf(counters[mode][fam])
                           for mode in ("e2e", "parsed")}
                     for fam in (*FAMILIES, "overall")},
        "text_content_f1": {mode: soft_f1(content[mode]) for mode in ("e2e", "parsed")},
        "terms": {name: {"mean": float(np.mean(vals)),
                         "stdev": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                         "n": len(vals)}
                  for name, vals in sorted(terms.items())},
        "parseability": parseability_curve(parse_records),
        "parse_rate": (sum(1 for _, ok in parse_records if ok) / len(parse_records)
                       if parse_records else 0.0),
    }
    return report


def metrics_table(report: dict) -> str:
    lines = ["metric\te2e\tparsed_only"]
    for fam, modes in report["families"].items():
        lines.append(f"matching_f1.{fam}\t{modes['e2e']['f1']:.4f}\t{modes['parsed']['f1']:.4f}")
        lines.append(f"coverage.{fam}\t{modes['e2e']['coverage']:.4f}\t{modes['parsed']['coverage']:.4f}")
    tc = report["text_content_f1"]
    lines.append(f"text_content_f1\t{tc['e2e']:.4f}\t{tc['parsed']:.4f}")
    for name, st in report["terms"].items():
        lines.append(f"{name}\t{st['mean']:.4f}\t{st['mean']:.4f}")
    return "\n".join(lines) + "\n"


def analyze_judges(scores: list[dict]) -> dict:
    """POA/MACE/fidelity per (axis, scale), isotonic 5<->100 link, and
    cross-model agreement."""
    series: dict[tuple, JudgeSeries] = {}
    for s in scores:
        if s["status"] != "ok":
            continue
        key = (s["model"], s["slide_id"], s["axis"], tuple(s["scale"]))
        series.setdefault(key, JudgeSeries(
            slide_id=s["slide_id"], axis=s["axis"],
            scale=tuple(s["scale"]))).points.append((s["severity"], s["raw"]))

    by_axis_scale: dict[str, dict] = {}
    pooled: dict[tuple, list[JudgeSeries]] = {}
    for (model, _sid, axis, scale), js in series.items():
        pooled.setdefault((model, axis, scale), []).append(js)
    for (model, axis, scale), group in sorted(pooled.items()):
        vals = {"poa_adj": [], "mace": [], "fidelity": []}
        for js in group:
            if len(js.points) >= 2:
                vals["poa_adj"].append(poa_adjacent(js))
                vals["mace"].append(mace(js))
                vals["fidelity"].append(fidelity(js))
        key = f"{model}|{axis}|{scale[0]}-{scale[1]}"
        by_axis_scale[key] = {k: float(np.mean(v)) if v else None
                              for k, v in vals.items()}

    # Isotonic link between the two scales per model, on pooled (slide,
    # axis, severity) points present on both scales.
    links = {}
    y_by_scale: dict[tuple, dict[tuple, float]] = {}
    for (model, sid, axis, scale), js in series.items():
        for s, raw in js.points:
            y_by_scale.setdefault((model, scale), {})[(sid, axis, s)] = (
                normalize_score(raw, scale))
    models = sorted({m for (m, _) in y_by_scale})
    for model in models:
        a = y_by_scale.get((model, JUDGE_SCALES[0]), {})
        b = y_by_scale.get((model, JUDGE_SCALES[1]), {})
        shared = sorted(set(a) & set(b))
        if len(shared) >= 2:
            fit = isotonic_fit([a[k] for k in shared], [b[k] for k in shared])
            links[model] = {"r2": fit.r2, "rmse": fit.rmse,
                            "degenerate": fit.degenerate}

    agreement = None
    if len(models) >= 2:
        per_model = {m: y_by_scale.get((m, JUDGE_SCALES[0]), {}) for m in models}
        try:
            pairs = cross_model_agreement(per_model)
            agreement = {f"{a}|{b}": v for (a, b), v in pairs.items()}
        except Exception:
            agreement = None

    return {"per_axis_scale": by_axis_scale, "isotonic_links": links,
            "agreement": agreement}


def analyze_ordering(results: list[dict]) -> dict:
    rows = []
    for r in results:
        if r["status"] != "ok" or r["predicted"] is None:
            rows.append({"deck_id": r["deck_id"], "length_ratio": 0.0,
                         "computable": False})
            continue
        try:
            res = rank_metrics(r["predicted"], r["truth"])
        except Exception:
            rows.append({"deck_id": r["deck_id"], "length_ratio": None,
                         "computable": False, "invalid": True})
            continue
        rows.append({"deck_id": r["deck_id"], "length_ratio": res.length_ratio,
                     "computable": res.computable,
                     "kendall_tau": res.kendall_tau,
                     "spearman_rho": res.spearman_rho,
                     "exact_match": res.exact_match})

    def agg(key: str) -> dict | None:
        vals = [r[key] for r in rows if r.get(key) is not None]
        if not vals:
            return None
        return {"mean": float(np.mean(vals)),
                "stdev": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                "n": len(vals)}

    return {"decks": rows,
            "summary": {k: agg(k) for k in ("length_ratio", "kendall_tau",
                                            "spearman_rho", "exact_match")}}


def render_report(metrics: dict, analytics: dict) -> str:
    lines = ["slide evaluation report", "=" * 40, ""]
    lines.append(f"parse rate: {metrics['parse_rate']:.3f}")
    lines.append("")
    lines.append("matching (e2e / parsed-only):")
    for fam, modes in metrics["families"].items():
        lines.append(f"  {fam:8s} F1 {modes['e2e']['f1']:.2f} ({modes['parsed']['f1']:.2f})"
                     f"  coverage {modes['e2e']['coverage']:.2f} ({modes['parsed']['coverage']:.2f})")
    tc = metrics["text_content_f1"]
    lines.append(f"  text content F1 {tc['e2e']:.2f} ({tc['parsed']:.2f})")
    lines.append("")
    lines.append("error terms (mean over matched pairs):")
    for name, st in metrics["terms"].items():
        lines.append(f"  {name:32s} {st['mean']:.4f} (n={st['n']})")
    lines.append("")
    lines.append("parseability by complexity bin:")
    for row in metrics["parseability"]:
        lo, hi = row["bin"]
        lines.append(f"  ({lo}, {hi}]: {row['rate']:.3f} "
                     f"[{row['ci_lo']:.3f}, {row['ci_hi']:.3f}] n={row['n']}")
    if analytics.get("judge"):
        lines.append("")
        lines.append("judge sensitivity (per model|axis|scale):")
        for key, vals in analytics["judge"]["per_axis_scale"].items():
            poa = "-" if vals["poa_adj"] is None else f"{vals['poa_adj']:.3f}"
            err = "-" if vals["mace"] is None else f"{vals['mace']:.3f}"
            lines.append(f"  {key:28s} POA_adj {poa}  MACE {err}")
    if analytics.get("ordering"):
        lines.append("")
        lines.append("ordering summary (mean +- sd):")
        for key, st in analytics["ordering"]["summary"].items():
            if st:
                lines.append(f"  {key:14s} {st['mean']:.3f} +- {st['stdev']:.3f} (n={st['n']})")
    return "\n".join(lines) + "\n"


def _plot_report(out_dir: Path, metrics: dict, analytics: dict) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if metrics["parseability"]:
        fig, ax = plt.subplots(figsize=(5, 3))
        labels = [f"({r['bin'][0]},{r['bin'][1]}]" for r in metrics["parseability"]]
        rates = [r["rate"] for r in metrics["parseability"]]
        ax.bar(labels, rates, color="#4C72B0")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("parse success")
        ax.set_xlabel("complexity bin")
        fig.tight_layout()
        fig.savefig(out_dir / "parseability.png", dpi=100)
        plt.close(fig)

    fams = [f for f in metrics["families"] if f != "overall"]
    fig, ax = plt.subplots(figsize=(5, 3))
    x = np.arange(len(fams))
    ax.bar(x - 0.2, [metrics["families"][f]["parsed"]["f1"] for f in fams],
           width=0.4, label="parsed-only", color="#4C72B0")
    ax.bar(x + 0.2, [metrics["families"][f]["e2e"]["f1"] for f in fams],
           width=0.4, label="e2e", color="#DD8452", hatch="//")
    ax.set_xticks(x, fams)
    ax.set_ylabel("matching F1")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "matching_f1.png", dpi=100)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Replay-cache seeding helpers (hermetic runs and tests)


def seed_extraction_cache(slides: list[Slide], cache_dir: Path | str,
                          responder=None, model: str = "",
                          temperature: float = 0.1) -> None:
    """Populate a replay cache with extraction responses for each slide.

    ``responder(slide) -> str`` defaults to the ground-truth oracle; return
    a non-JSON string to plant a parse failure.
    """
    transport = gateway.ReplayTransport(cache_dir)
    responder = responder or gateway.oracle_extraction_response
    for slide in slides:
        payload = gateway.build_extraction_prompt(png_bytes(slide), model,
                                                  temperature)
        transport.store(payload, responder(slide))


def seed_judge_cache(manifest_rows: list[dict], cache_dir: Path | str,
                     responder=None, model: str = "judge") -> None:
    """Populate a replay cache with judge scores for every perturbed slide.

    ``responder(row, scale) -> str`` defaults to a calibrated judge whose
    normalized degradation tracks severity.
    """
    transport = gateway.ReplayTransport(cache_dir)

    def default_responder(row: dict, scale: tuple[int, int]) -> str:
        lo, hi = scale
        return str(round(hi - row["severity"] * (hi - lo)))

    responder = responder or default_responder
    for row in manifest_rows:
        slide = slide_from_json(Path(row["slide_path"]).read_text(encoding="utf-8"))
        png = png_bytes(slide)
        for scale in JUDGE_SCALES:
            payload = gateway.build_judge_prompt(png, row["axis"], scale, model)
            transport.store(payload, responder(row, scale))


def seed_order_cache(slides: list[Slide], cache_dir: Path | str,
                     base_seed: int = 0, responder=None) -> None:
    """Populate a replay cache with ordering responses per deck.

    ``responder(truth) -> list[int]`` defaults to the correct order.
    """
    transport = gateway.ReplayTransport(cache_dir)
    decks: dict[str, list[Slide]] = {}
    for s in slides:
        decks.setdefault(s.slide_id.split("#")[0], []).append(s)
    for deck_id, deck_slides in sorted(decks.items()):
        n = len(deck_slides)
        rng = make_rng(derive_seed(base_seed, deck_id, "order", 0.0))
        shuffle = list(rng.permutation(n))
        pngs = [png_bytes(deck_slides[i]) for i in shuffle]
        truth = [shuffle.index(i) for i in range(n)]
        reply = responder(truth) if responder else truth
        payload = gateway.build_ordering_prompt(pngs)
        transport.store(payload, json.dumps([int(i) for i in reply]))
