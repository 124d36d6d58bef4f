"""Fixture-driven mock backends for fully offline runs.

A fixture directory looks like::

    mock/
      chat.json          {request digest: reply | {"error": ...}, "__default__": reply}
      detect.json        {"<imghash16>|<label>" or "<label>": [box dicts]}
      search.json        {"text": {normalized query: [hit dicts]},
                          "image": {imghash16: [hit dicts]}}
      rerank_image.json  {imghash16: [caption keywords]}
      pages/index.json   {url: filename | {"error": ...}}
      pages/*.html       page bodies

Error injection: any value may be {"error": "timeout"} or {"error": "http:<status>"};
an optional "times": N makes the failure transient (N failing attempts, then the
"then" value is served).
"""

from __future__ import annotations

import json
import re
import threading
from pathlib import Path
from typing import Any, Sequence

from ..core.types import BBox, SearchHit
from ..media import ImageBuf
from .base import (
    BackendUnavailable,
    Backends,
    CallLog,
    ChatBackend,
    ChatRequest,
    DetectorBackend,
    FetchBackend,
    HttpError,
    RerankBackend,
    SearchBackend,
    Timeout,
    chat_digest,
    clamp_scores,
    retry_call,
)

DEFAULT_KEY = "__default__"

_TOKEN_RE = re.compile(r"[a-z0-9']+")


def tokenize(text: str) -> set[str]:
    """Lowercase word tokens; shared by the mock rerankers and the mock judge."""
    return set(_TOKEN_RE.findall(text.lower()))


def normalize_query(query: str) -> str:
    """Canonical text-query form: trimmed, lowercased, whitespace collapsed."""
    return " ".join(query.strip().lower().split())


class _FailureBook:
    """Tracks transient failure injections ({'error': ..., 'times': N, 'then': ...})."""

    def __init__(self) -> None:
        self._remaining: dict[str, int] = {}
        self._lock = threading.Lock()

    def resolve(self, key: str, value: Any) -> Any:
        """Return the effective fixture value, raising the injected error if armed."""
        if not (isinstance(value, dict) and "error" in value):
            return value
        times = value.get("times")
        if times is not None:
            with self._lock:
                left = self._remaining.setdefault(key, int(times))
                if left <= 0:
                    return value.get("then")
                self._remaining[key] = left - 1
        _raise_injected(value["error"])
        raise AssertionError("unreachable")


def _raise_injected(spec: str) -> None:
    if spec == "timeout":
        raise Timeout("injected timeout")
    if spec.startswith("http:"):
        raise HttpError(int(spec.split(":", 1)[1]), "injected HTTP error")
    raise BackendUnavailable(f"injected failure: {spec}")


def _load_json(path: Path, fallback: Any) -> Any:
    if not path.exists():
        return fallback
    return json.loads(path.read_text(encoding="utf-8"))


class MockChat(ChatBackend):
    """Replies keyed by the canonical request digest."""

    def __init__(self, table: dict[str, Any], call_log: CallLog, retries: int = 1):
        self._table = table
        self._log = call_log
        self._retries = retries
        self._failures = _FailureBook()

    def chat(self, request: ChatRequest, purpose: str = "Chat") -> str:
        digest = chat_digest(request)

        def attempt() -> str:
            self._log.record("chat", f"chat:{purpose}", digest)
            if digest in self._table:
                value = self._failures.resolve(digest, self._table[digest])
            elif DEFAULT_KEY in self._table:
                value = self._table[DEFAULT_KEY]
            else:
                raise BackendUnavailable(
                    f"no chat fixture for digest {digest} (purpose={purpose})")
            if not isinstance(value, str):
                raise BackendUnavailable(f"unusable chat fixture for digest {digest}")
            return value

        return retry_call(attempt, self._retries)  # type: ignore[return-value]


class MockDetector(DetectorBackend):
    """Boxes keyed by "<imghash16>|<label>", falling back to the bare label."""

    def __init__(self, table: dict[str, Any], call_log: CallLog):
        self._table = table
        self._log = call_log

    def detect(self, image: ImageBuf, label: str) -> list[BBox]:
        key = f"{image.hash16}|{label}"
        self._log.record("detector", "detect", key)
        raw = self._table.get(key, self._table.get(label, []))
        boxes = [
            BBox(x=int(b["x"]), y=int(b["y"]), w=int(b["w"]), h=int(b["h"]),
                 label=label, confidence=float(b.get("confidence", 1.0)))
            for b in raw
        ]
        return sorted(boxes, key=lambda b: -b.confidence)


class MockRerank(RerankBackend):
    """Lexical-overlap scoring.

    Text: |query tokens ∩ chunk tokens| / |query tokens|.
    Image: fraction of the image's fixture caption keywords present in the chunk.
    """

    def __init__(self, image_keywords: dict[str, list[str]], call_log: CallLog):
        self._keywords = image_keywords
        self._log = call_log

    def rerank_text(self, query: str, chunks: Sequence[str]) -> list[float]:
        self._log.record("reranker", "rerank_text", normalize_query(query)[:80])
        q_tokens = tokenize(query)
        if not q_tokens:
            return clamp_scores([0.0] * len(chunks), len(chunks))
        scores = [len(q_tokens & tokenize(c)) / len(q_tokens) for c in chunks]
        return clamp_scores(scores, len(chunks))

    def rerank_image(self, image: ImageBuf, chunks: Sequence[str]) -> list[float]:
        self._log.record("reranker", "rerank_image", image.hash16)
        keywords = [k.lower() for k in self._keywords.get(image.hash16, [])]
        if not keywords:
            return clamp_scores([0.0] * len(chunks), len(chunks))
        scores = []
        for chunk in chunks:
            c_tokens = tokenize(chunk)
            scores.append(sum(1 for k in keywords if k in c_tokens) / len(keywords))
        return clamp_scores(scores, len(chunks))


class MockSearch(SearchBackend):
    """Hits keyed by normalized query (text) or image content hash (image)."""

    def __init__(self, table: dict[str, Any], call_log: CallLog):
        self._text = table.get("text", {})
        self._image = table.get("image", {})
        self._log = call_log
        self._failures = _FailureBook()

    def _hits(self, raw: Any, key: str, top_n: int) -> list[SearchHit]:
        raw = self._failures.resolve(key, raw)
        hits = []
        for i, h in enumerate(raw[:top_n], start=1):
            hits.append(SearchHit(url=h["url"], title=h.get("title", ""),
                                  snippet=h.get("snippet", ""),
                                  position=int(h.get("position", i))))
        return hits

    def text_search(self, query: str, top_n: int) -> list[SearchHit]:
        key = normalize_query(query)
        self._log.record("search", "text_search", key)
        return self._hits(self._text.get(key, []), f"text:{key}", top_n)

    def image_search(self, image: ImageBuf, top_n: int) -> list[SearchHit]:
        key = image.hash16
        self._log.record("search", "image_search", key)
        return self._hits(self._image.get(key, []), f"image:{key}", top_n)


class MockFetch(FetchBackend):
    """Serves page bodies from the fixture directory's pages/ tree."""

    def __init__(self, pages_dir: Path, index: dict[str, Any], call_log: CallLog,
                 retries: int = 1):
        self._dir = pages_dir
        self._index = index
        self._log = call_log
        self._retries = retries
        self._failures = _FailureBook()

    def fetch_page(self, url: str) -> bytes:
        def attempt() -> bytes:
            self._log.record("fetcher", "fetch_page", url)
            if url not in self._index:
                raise HttpError(404, f"no page fixture for {url}")
            value = self._failures.resolve(url, self._index[url])
            if not isinstance(value, str):
                raise HttpError(404, f"unusable page fixture for {url}")
            return (self._dir / value).read_bytes()

        return retry_call(attempt, self._retries)  # type: ignore[return-value]


def load_mock_backends(fixture_dir: str | Path, call_log: CallLog | None = None,
                       chat_retries: int = 1, fetch_retries: int = 1) -> Backends:
    """Assemble the full backend set from a fixture directory."""
    root = Path(fixture_dir)
    if not root.is_dir():
        raise BackendUnavailable(f"mock fixture directory not found: {root}")
    log = call_log if call_log is not None else CallLog()
    pages_dir = root / "pages"
    return Backends(
        chat=MockChat(_load_json(root / "chat.json", {}), log, retries=chat_retries),
        detector=MockDetector(_load_json(root / "detect.json", {}), log),
        reranker=MockRerank(_load_json(root / "rerank_image.json", {}), log),
        search=MockSearch(_load_json(root / "search.json", {}), log),
        fetcher=MockFetch(pages_dir, _load_json(pages_dir / "index.json", {}), log,
                          retries=fetch_retries),
        call_log=log,
    )


__all__ = [
    "DEFAULT_KEY",
    "MockChat",
    "MockDetector",
    "MockFetch",
    "MockRerank",
    "MockSearch",
    "load_mock_backends",
    "normalize_query",
    "tokenize",
]
