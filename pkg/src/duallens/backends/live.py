"""Live HTTP adapters.

Each adapter accepts an httpx transport so tests can exercise wire formats
and retry behaviour without a network. Endpoint URLs come from explicit
settings or from DUALLENS_* environment variables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Sequence
from urllib.parse import urlparse

import httpx

from ..core.types import BBox, SearchHit
from ..media import ImageBuf, to_base64_png
from .base import (
    BackendUnavailable,
    Backends,
    CallLog,
    ChatBackend,
    ChatRequest,
    DetectorBackend,
    FetchBackend,
    HttpError,
    ImagePart,
    InvalidUrl,
    QuotaExceeded,
    RerankBackend,
    SearchBackend,
    TextPart,
    Timeout,
    chat_digest,
    clamp_scores,
    retry_call,
    validate_hits,
)


@dataclass(frozen=True)
class LiveSettings:
    chat_url: str = ""
    chat_model: str = ""
    detect_url: str = ""
    rerank_url: str = ""
    search_url: str = ""
    api_key: str = ""
    timeout_s: float = 30.0
    chat_retries: int = 1
    fetch_retries: int = 1

    @classmethod
    def from_env(cls) -> "LiveSettings":
        env = os.environ
        return cls(
            chat_url=env.get("DUALLENS_CHAT_URL", ""),
            chat_model=env.get("DUALLENS_CHAT_MODEL", ""),
            detect_url=env.get("DUALLENS_DETECT_URL", ""),
            rerank_url=env.get("DUALLENS_RERANK_URL", ""),
            search_url=env.get("DUALLENS_SEARCH_URL", ""),
            api_key=env.get("DUALLENS_API_KEY", ""),
            timeout_s=float(env.get("DUALLENS_TIMEOUT_S", "30")),
        )


def _client(timeout_s: float, transport: httpx.BaseTransport | None) -> httpx.Client:
    return httpx.Client(timeout=timeout_s, transport=transport)


def _post_json(client: httpx.Client, url: str, payload: dict[str, Any],
               api_key: str = "") -> dict[str, Any]:
    headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
    try:
        resp = client.post(url, json=payload, headers=headers)
    except httpx.TimeoutException as exc:
        raise Timeout(str(exc)) from exc
    except httpx.TransportError as exc:
        raise BackendUnavailable(str(exc)) from exc
    if resp.status_code == 429:
        raise QuotaExceeded(f"{url} returned 429")
    if resp.status_code >= 400:
        raise BackendUnavailable(f"{url} returned {resp.status_code}")
    try:
        data = resp.json()
    except ValueError as exc:
        raise BackendUnavailable(f"{url} returned non-JSON body") from exc
    if not isinstance(data, dict):
        raise BackendUnavailable(f"{url} returned a non-object body")
    return data


class HttpChatBackend(ChatBackend):
    def __init__(self, settings: LiveSettings, call_log: CallLog,
                 transport: httpx.BaseTransport | None = None):
        self._s = settings
        self._log = call_log
        self._client = _client(settings.timeout_s, transport)

    def chat(self, request: ChatRequest, purpose: str = "Chat") -> str:
        digest = chat_digest(request)
        payload = {
            "model": self._s.chat_model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [_wire_message(m) for m in request.messages],
        }

        def attempt() -> str:
            self._log.record("chat", f"chat:{purpose}", digest)
            data = _post_json(self._client, self._s.chat_url, payload, self._s.api_key)
            text = data.get("text")
            if not isinstance(text, str):
                raise BackendUnavailable("chat endpoint reply lacks a 'text' string")
            return text

        return retry_call(attempt, self._s.chat_retries)  # type: ignore[return-value]


def _wire_message(message: Any) -> dict[str, Any]:
    content: list[dict[str, str]] = []
    for part in message.parts:
        if isinstance(part, TextPart):
            content.append({"type": "text", "text": part.text})
        elif isinstance(part, ImagePart):
            content.append({"type": "image_base64", "data": to_base64_png(part.image)})
    return {"role": message.role, "content": content}


class HttpDetectorBackend(DetectorBackend):
    def __init__(self, settings: LiveSettings, call_log: CallLog,
                 transport: httpx.BaseTransport | None = None):
        self._s = settings
        self._log = call_log
        self._client = _client(settings.timeout_s, transport)

    def detect(self, image: ImageBuf, label: str) -> list[BBox]:
        self._log.record("detector", "detect", f"{image.hash16}|{label}")
        data = _post_json(self._client, self._s.detect_url,
                          {"image_base64": to_base64_png(image), "label": label},
                          self._s.api_key)
        boxes = []
        for b in data.get("boxes", []):
            boxes.append(BBox(x=int(b["x"]), y=int(b["y"]), w=int(b["w"]), h=int(b["h"]),
                              label=label, confidence=float(b.get("confidence", 0.0))))
        return sorted(boxes, key=lambda b: -b.confidence)


class HttpRerankBackend(RerankBackend):
    def __init__(self, settings: LiveSettings, call_log: CallLog,
                 transport: httpx.BaseTransport | None = None):
        self._s = settings
        self._log = call_log
        self._client = _client(settings.timeout_s, transport)

    def _scores(self, payload: dict[str, Any], expected: int) -> list[float]:
        data = _post_json(self._client, self._s.rerank_url, payload, self._s.api_key)
        scores = data.get("scores")
        if not isinstance(scores, list):
            raise BackendUnavailable("rerank endpoint reply lacks a 'scores' list")
        return clamp_scores(scores, expected)

    def rerank_text(self, query: str, chunks: Sequence[str]) -> list[float]:
        self._log.record("reranker", "rerank_text", query[:80])
        return self._scores({"mode": "text", "query": query, "documents": list(chunks)},
                            len(chunks))

    def rerank_image(self, image: ImageBuf, chunks: Sequence[str]) -> list[float]:
        self._log.record("reranker", "rerank_image", image.hash16)
        return self._scores({"mode": "image", "image_base64": to_base64_png(image),
                             "documents": list(chunks)}, len(chunks))


class HttpSearchBackend(SearchBackend):
    def __init__(self, settings: LiveSettings, call_log: CallLog,
                 transport: httpx.BaseTransport | None = None):
        self._s = settings
        self._log = call_log
        self._client = _client(settings.timeout_s, transport)

    def _hits(self, payload: dict[str, Any], top_n: int) -> list[SearchHit]:
        data = _post_json(self._client, self._s.search_url, payload, self._s.api_key)
        results = data.get("results")
        if not isinstance(results, list):
            raise BackendUnavailable("search endpoint reply lacks a 'results' list")
        hits = [SearchHit(url=r["url"], title=r.get("title", ""),
                          snippet=r.get("snippet", ""),
                          position=int(r.get("position", i)))
                for i, r in enumerate(results[:top_n], start=1)]
        return validate_hits(hits)

    def text_search(self, query: str, top_n: int) -> list[SearchHit]:
        self._log.record("search", "text_search", query[:80])
        return self._hits({"mode": "text", "q": query, "num": top_n}, top_n)

    def image_search(self, image: ImageBuf, top_n: int) -> list[SearchHit]:
        self._log.record("search", "image_search", image.hash16)
        return self._hits({"mode": "image", "image_base64": to_base64_png(image),
                           "num": top_n}, top_n)


class HttpFetchBackend(FetchBackend):
    def __init__(self, settings: LiveSettings, call_log: CallLog,
                 transport: httpx.BaseTransport | None = None):
        self._s = settings
        self._log = call_log
        self._client = _client(settings.timeout_s, transport)

    def fetch_page(self, url: str) -> bytes:
        parsed = urlparse(url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise InvalidUrl(f"not a fetchable URL: {url}")

        def attempt() -> bytes:
            self._log.record("fetcher", "fetch_page", url)
            try:
                resp = self._client.get(url)
            except httpx.TimeoutException as exc:
                raise Timeout(str(exc)) from exc
            except httpx.TransportError as exc:
                raise BackendUnavailable(str(exc)) from exc
            if resp.status_code >= 400:
                raise HttpError(resp.status_code, f"GET {url} -> {resp.status_code}")
            return resp.content

        return retry_call(attempt, self._s.fetch_retries)  # type: ignore[return-value]


def load_live_backends(settings: LiveSettings | None = None,
                       call_log: CallLog | None = None,
                       transport: httpx.BaseTransport | None = None) -> Backends:
    s = settings if settings is not None else LiveSettings.from_env()
    missing = [name for name in ("chat_url", "detect_url", "rerank_url", "search_url")
               if not getattr(s, name)]
    if missing:
        raise BackendUnavailable(
            "live backends need endpoint URLs (set DUALLENS_* env vars); "
            f"missing: {', '.join(missing)}")
    log = call_log if call_log is not None else CallLog()
    return Backends(
        chat=HttpChatBackend(s, log, transport),
        detector=HttpDetectorBackend(s, log, transport),
        reranker=HttpRerankBackend(s, log, transport),
        search=HttpSearchBackend(s, log, transport),
        fetcher=HttpFetchBackend(s, log, transport),
        call_log=log,
    )


__all__ = [
    "HttpChatBackend",
    "HttpDetectorBackend",
    "HttpFetchBackend",
    "HttpRerankBackend",
    "HttpSearchBackend",
    "LiveSettings",
    "load_live_backends",
]
