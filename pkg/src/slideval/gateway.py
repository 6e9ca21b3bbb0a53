"""Client for OpenAI-compatible vision endpoints plus an offline replay
transport for hermetic runs.

Payloads are pure functions of (image, task, config), so every request has a
stable content hash; the replay transport serves canned responses keyed by
that hash. Transport errors are retried with exponential backoff; model
content errors (invalid JSON, out-of-scale scores) are terminal and recorded
as parse failures.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import httpx

from .schema import SLIDE_H, SLIDE_W, Slide, ValidationError, validate_slide

TASKS = ("extract", "judge", "order")

JUDGE_DIMENSIONS = {
    "text": ("text quality", [
        "Clarity and plain language",
        "Grammar/spelling",
        "Bullet length (prefer one line)",
        "Concision (avoid fluff)",
    ]),
    "geometry": ("layout geometry", [
        "Alignment to grid/edges/baselines",
        "Consistent spacing and margins",
        "Balance and visual hierarchy",
        "Element sizing matches importance",
    ]),
    "style": ("style", [
        "Font family consistency and readability",
        "Font size appropriate for viewing distance",
        "Contrast and color harmony",
        "Consistent emphasis (bold/italic/underline sparingly)",
    ]),
}

SCALE_LABELS = ("very poor", "acceptable", "excellent")

_SCHEMA_TABLE = """\
Field(s) | Applies to | Unit / Notes
w, h | slide | px; fixed at {w}x{h}
x, y, w, h | rect, text, image, table | px; top-left anchor
x1, y1, x2, y2 | line | px; line endpoints
rx | rect | px; corner radius
strokeWidth | rect, line | points (pt); absolute width
font.size | text | pt; absolute font size
font.style | text | categorical; bold, italic, underscore
color fields | text, slide, line, rect | normalized hex (#RRGGBB)
align | text | categorical; left/center/right/justify/distributed"""


class TransportFailure(Exception):
    pass


@dataclass
class ModelEndpoint:
    base_url: str
    model: str
    credential_env: str = "SLIDEVAL_API_KEY"
    temperature: float = 0.1
    max_concurrency: int = 4
    max_attempts: int = 3
    backoff_base: float = 0.5
    reasoning_effort: str | None = None

    def api_key(self) -> str:
        return os.environ.get(self.credential_env, "")


@dataclass
class RunRecord:
    slide_id: str
    task: str
    run_index: int
    request_hash: str
    raw_response: str
    status: str  # ok | parse_failure | transport_failure
    latency: float = 0.0
    parsed: object | None = None


def _b64_image(png: bytes) -> str:
    return "data:image/png;base64," + base64.b64encode(png).decode("ascii")


def request_hash(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


# ---------------------------------------------------------------------------
# Prompt builders


def build_extraction_prompt(png: bytes, model: str = "",
                            temperature: float = 0.1) -> dict:
    system = (
        "Analyze the location, size, and styling information of elements in the slide.\n"
        f"The size of the slide is: {SLIDE_W} (w) x {SLIDE_H} (h) pixels. "
        "The screenshot of the slide was taken at DPI = 72.\n"
        "Top-left of the slide is (0,0), +x rightward, +y downward.\n"
        "All geometry fields are integers in pixels, unless noted otherwise.\n\n"
        "Return a JSON object with the following top-level fields for the single slide:\n"
        "{ size, background, texts:[], rects:[], lines:[], images:[], tables:[] }.\n"
        "Include every required field exactly as specified.\n\n"
        + _SCHEMA_TABLE.format(w=SLIDE_W, h=SLIDE_H)
    )
    return {
        "model": model,
        "temperature": temperature,
        "response_format": {"type": "json_object"},
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": [
                {"type": "image_url",
                 "image_url": {"url": _b64_image(png), "detail": "auto"}},
            ]},
        ],
    }


def build_judge_prompt(png: bytes, dimension: str, scale: tuple[int, int],
                       model: str = "", temperature: float = 0.1) -> dict:
    name, bullets = JUDGE_DIMENSIONS[dimension]
    lo, hi = scale
    mid = (lo + hi) / 2.0
    mid_text = f"{mid:g}"
    low, mid_label, high = SCALE_LABELS
    system = (
        "[Role]\n"
        f"You score the {name} of a PowerPoint slide.\n\n"
        "[Scale]\n"
        f"Return ONE integer on the scale {lo}..{hi} (inclusive).\n"
        "Anchors:\n"
        f"- Min ({lo}): \"{low}\".\n"
        f"- Mid ({mid_text}): \"{mid_label}\".\n"
        f"- Max ({hi}): \"{high}\".\n\n"
        "[How to judge]\n"
        "Consider only:\n"
        + "\n".join(f"- {b}" for b in bullets)
    )
    return {
        "model": model,
        "temperature": temperature,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": [
                {"type": "image_url",
                 "image_url": {"url": _b64_image(png), "detail": "auto"}},
            ]},
        ],
    }


def build_ordering_prompt(pngs: list[bytes], model: str = "",
                          temperature: float = 0.1) -> dict:
    system = (
        f"You are shown {len(pngs)} slides of one presentation in shuffled order, "
        "numbered 0 to N-1 in the order given.\n"
        "Restore the correct order. Return a JSON array of the slide numbers "
        "in their original presentation order, containing every number exactly once."
    )
    content = [
        {"type": "image_url", "image_url": {"url": _b64_image(p), "detail": "auto"}}
        for p in pngs
    ]
    return {
        "model": model,
        "temperature": temperature,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": content},
        ],
    }


# ---------------------------------------------------------------------------
# Transports


class HttpTransport:
    """Live chat-completions transport with retry on transport-class errors."""

    def __init__(self, endpoint: ModelEndpoint):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=120.0)

    def send(self, payload: dict) -> str:
        ep = self.endpoint
        url = ep.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {ep.api_key()}",
                   "api-key": ep.api_key()}
        if ep.reasoning_effort:
            payload = {**payload, "reasoning_effort": ep.reasoning_effort}
        last_error: Exception | None = None
        for attempt in range(ep.max_attempts):
            try:
                resp = self._client.post(url, json=payload, headers=headers)
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise TransportFailure(f"HTTP {resp.status_code}")
                resp.raise_for_status()
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except (httpx.HTTPError, TransportFailure, KeyError) as exc:
                last_error = exc
                if attempt + 1 < ep.max_attempts:
                    time.sleep(ep.backoff_base * 2 ** attempt)
        raise TransportFailure(str(last_error))


class ReplayTransport:
    """Serves canned responses from disk (or a callable) keyed by request hash.

    Canned files live in a directory as ``<request-hash>.txt`` holding the raw
    response content. A missing file raises TransportFailure, mirroring an
    unreachable endpoint.
    """

    def __init__(self, source: Path | str | Callable[[dict], str]):
        self._fn = source if callable(source) else None
        self._dir = None if callable(source) else Path(source)

    def send(self, payload: dict) -> str:
        if self._fn is not None:
            return self._fn(payload)
        path = self._dir / f"{request_hash(payload)}.txt"
        if not path.exists():
            raise TransportFailure(f"no canned response {path.name}")
        return path.read_text(encoding="utf-8")

    def store(self, payload: dict, response: str) -> Path:
        self._dir.mkdir(parents=True, exist_ok=True)
        path = self._dir / f"{request_hash(payload)}.txt"
        path.write_text(response, encoding="utf-8")
        return path


# ---------------------------------------------------------------------------
# Task requests

_INT_RE = re.compile(r"^\s*(-?\d+)\s*$")


def _timed_send(transport, payload: dict) -> tuple[str, float]:
    start = time.perf_counter()
    raw = transport.send(payload)
    return raw, time.perf_counter() - start


def request_extraction(transport, png: bytes, slide_id: str,
                       n_runs: int = 3, model: str = "",
                       temperature: float = 0.1) -> list[RunRecord]:
    """N independent extraction runs; each validated against the strict schema."""
    payload = build_extraction_prompt(png, model, temperature)
    h = request_hash(payload)
    records = []
    for run in range(n_runs):
        try:
            raw, latency = _timed_send(transport, payload)
        except TransportFailure as exc:
            records.append(RunRecord(slide_id, "extract", run, h, str(exc),
                                     "transport_failure"))
            continue
        try:
            slide = validate_slide(json.loads(raw), slide_id=slide_id,
                                   integral_geometry=True)
            records.append(RunRecord(slide_id, "extract", run, h, raw, "ok",
                                     latency, parsed=slide))
        except (json.JSONDecodeError, ValidationError):
            records.append(RunRecord(slide_id, "extract", run, h, raw,
                                     "parse_failure", latency))
    return records


def request_judge_score(transport, png: bytes, slide_id: str, dimension: str,
                        scale: tuple[int, int], model: str = "",
                        temperature: float = 0.1) -> RunRecord:
    payload = build_judge_prompt(png, dimension, scale, model, temperature)
    h = request_hash(payload)
    try:
        raw, latency = _timed_send(transport, payload)
    except TransportFailure as exc:
        return RunRecord(slide_id, "judge", 0, h, str(exc), "transport_failure")
    m = _INT_RE.match(raw)
    if not m:
        return RunRecord(slide_id, "judge", 0, h, raw, "parse_failure", latency)
    score = int(m.group(1))
    if not scale[0] <= score <= scale[1]:
        return RunRecord(slide_id, "judge", 0, h, raw, "parse_failure", latency)
    return RunRecord(slide_id, "judge", 0, h, raw, "ok", latency, parsed=score)


def request_ordering(transport, pngs: list[bytes], deck_id: str,
                     model: str = "", temperature: float = 0.1) -> RunRecord:
    payload = build_ordering_prompt(pngs, model, temperature)
    h = request_hash(payload)
    try:
        raw, latency = _timed_send(transport, payload)
    except TransportFailure as exc:
        return RunRecord(deck_id, "order", 0, h, str(exc), "transport_failure")
    try:
        seq = json.loads(raw)
        if not isinstance(seq, list) or not all(isinstance(i, int) for i in seq):
            raise ValueError("not an integer sequence")
    except (json.JSONDecodeError, ValueError):
        return RunRecord(deck_id, "order", 0, h, raw, "parse_failure", latency)
    return RunRecord(deck_id, "order", 0, h, raw, "ok", latency, parsed=seq)


def run_batch(jobs: list[Callable[[], object]], max_concurrency: int) -> list:
    """Run request jobs with a bounded in-flight window; preserves order."""
    with ThreadPoolExecutor(max_workers=max(1, max_concurrency)) as pool:
        return [f.result() for f in [pool.submit(j) for j in jobs]]


def accounting(records: list[RunRecord]) -> dict[str, int]:
    out = {"ok": 0, "parse_failure": 0, "transport_failure": 0}
    for r in records:
        out[r.status] += 1
    out["total"] = len(records)
    return out


def oracle_extraction_response(slide: Slide) -> str:
    """Canned extraction response equal to the ground truth (integer px)."""
    from .schema import slide_to_doc

    doc = slide_to_doc(slide)
    doc.pop("id", None)

    def round_geom(d: dict, keys):
        for k in keys:
            if k in d:
                d[k] = round(d[k])

    for t in doc["texts"]:
        round_geom(t, ("x", "y", "w", "h"))
    for r in doc["rects"]:
        round_geom(r, ("x", "y", "w", "h"))
    for ln in doc["lines"]:
        round_geom(ln, ("x1", "y1", "x2", "y2"))
    for im in doc["images"]:
        round_geom(im, ("x", "y", "w", "h"))
    for tb in doc["tables"]:
        round_geom(tb, ("x", "y", "w", "h"))
    return json.dumps(doc)
