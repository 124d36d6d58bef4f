"""Shared utilities for the test suite: in-memory backends, random HTML docs,
and independent reference implementations used as oracles."""
from __future__ import annotations

import random
import re
from typing import Any, Sequence

import numpy as np

from duallens.backends.base import (
    Backends,
    CallLog,
    ChatBackend,
    ChatRequest,
    FetchBackend,
    HttpError,
    chat_digest,
)
from duallens.backends.mock import MockChat, MockDetector, MockRerank, MockSearch
from duallens.media import ImageBuf, make_image


def make_img(seed: int, h: int = 32, w: int = 40) -> ImageBuf:
    rng = np.random.default_rng(seed)
    return make_image(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


class MemFetch(FetchBackend):
    """Serves page bodies straight from a dict; {"error": spec} values raise."""

    def __init__(self, pages: dict[str, Any], call_log: CallLog):
        self._pages = pages
        self._log = call_log

    def fetch_page(self, url: str) -> bytes:
        self._log.record("fetcher", "fetch_page", url)
        if url not in self._pages:
            raise HttpError(404, f"no page for {url}")
        value = self._pages[url]
        if isinstance(value, dict) and "error" in value:
            spec = value["error"]
            if spec.startswith("http:"):
                raise HttpError(int(spec.split(":", 1)[1]), "injected")
            raise HttpError(500, f"injected: {spec}")
        return value.encode("utf-8")


class ScriptedChat(ChatBackend):
    """Returns canned replies in order, ignoring the request content."""

    def __init__(self, replies: Sequence[str], call_log: CallLog | None = None):
        self._replies = list(replies)
        # An empty CallLog is falsy (it has __len__), so test identity, not truth.
        self._log = CallLog() if call_log is None else call_log
        self.calls = 0

    def chat(self, request: ChatRequest, purpose: str = "Chat") -> str:
        self._log.record("chat", f"chat:{purpose}", chat_digest(request))
        reply = self._replies[min(self.calls, len(self._replies) - 1)]
        self.calls += 1
        return reply


def mini_backends(chat_table: dict[str, Any] | None = None,
                  detect_table: dict[str, Any] | None = None,
                  search_table: dict[str, Any] | None = None,
                  image_keywords: dict[str, list[str]] | None = None,
                  pages: dict[str, Any] | None = None,
                  call_log: CallLog | None = None,
                  chat_retries: int = 1) -> Backends:
    """Assemble a backend set from in-memory tables, no fixture directory."""
    log = CallLog() if call_log is None else call_log
    return Backends(
        chat=MockChat(chat_table or {}, log, retries=chat_retries),
        detector=MockDetector(detect_table or {}, log),
        reranker=MockRerank(image_keywords or {}, log),
        search=MockSearch(search_table or {}, log),
        fetcher=MemFetch(pages or {}, log),
        call_log=log,
    )


# --- Reference implementations -------------------------------------------------

def oracle_chunk_spans(text: str, size: int, overlap: int) -> list[tuple[int, int]]:
    """Exhaustive-scan restatement of the windowed chunking rule."""
    n = len(text)
    spans: list[tuple[int, int]] = []
    start = 0
    while start < n:
        if n - start <= size:
            spans.append((start, n))
            break
        lo, hi = start + size - overlap, start + size
        paragraph = [i for i in range(lo, hi + 1) if text[i:i + 2] == "\n\n"]
        if paragraph:
            end = paragraph[-1]
        else:
            sentence = [i for i in range(lo, hi + 1)
                        if text[i - 1] in ".!?" and (i >= n or text[i].isspace())]
            end = sentence[-1] if sentence else hi
        spans.append((start, end))
        start = max(end - overlap, start + 1)
    return spans


def oracle_select(fused: Sequence[float], tie_keys: Sequence[tuple[int, int]],
                  threshold: float, top_k: int) -> list[int]:
    """Brute-force chunk selection: strict threshold, score-then-position order."""
    kept = [i for i, s in enumerate(fused) if s > threshold]
    kept.sort(key=lambda i: (-fused[i], tie_keys[i][0], tie_keys[i][1]))
    return kept[:top_k]


# --- Random document generation ------------------------------------------------

_WORDS = ("alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo "
          "lima mike november oscar papa quebec romeo sierra tango uniform victor "
          "whiskey xray yankee zulu amber basalt cedar dune ember fjord").split()

_ENTITIES = ("&amp;", "&lt;", "&gt;", "&quot;", "&#65;", "&nbsp;")


def _sentence(rng: random.Random) -> str:
    words = [rng.choice(_WORDS) for _ in range(rng.randint(3, 12))]
    if rng.random() < 0.15:
        words.insert(rng.randrange(len(words)), rng.choice(_ENTITIES))
    body = " ".join(words)
    return body[0].upper() + body[1:] + rng.choice(".!?")


def _paragraph(rng: random.Random) -> str:
    parts = [_sentence(rng) for _ in range(rng.randint(1, 6))]
    if rng.random() < 0.3:
        k = rng.randrange(len(parts))
        tag = rng.choice(("b", "em", "span", "a href='#'"))
        parts[k] = f"<{tag}>{parts[k]}</{tag.split()[0]}>"
    return " ".join(parts)


def random_html_doc(rng: random.Random) -> str:
    """One messy but well-formed-enough HTML page."""
    title = _sentence(rng).rstrip(".!?")
    blocks = []
    for _ in range(rng.randint(1, 8)):
        para = _paragraph(rng)
        kind = rng.random()
        if kind < 0.5:
            blocks.append(f"<p>{para}</p>")
        elif kind < 0.7:
            blocks.append(f"<div>{para}</div>")
        elif kind < 0.85:
            items = "".join(f"<li>{_sentence(rng)}</li>" for _ in range(rng.randint(1, 4)))
            blocks.append(f"<ul>{items}</ul>")
        else:
            blocks.append(f"<h2>{_sentence(rng)}</h2><p>{para}</p>")
    noise = ("<script>var x = 1 < 2;</script>"
             "<style>p { color: red; }</style>"
             "<nav><a href='/'>skip me</a></nav>")
    comment = "<!-- hidden -->" if rng.random() < 0.5 else ""
    return (f"<!DOCTYPE html><html><head><title>{title}</title>{noise}</head>"
            f"<body>{comment}<header>chrome</header>{''.join(blocks)}"
            f"<footer>fine print</footer></body></html>")


RESIDUAL_TAG = re.compile(r"<[a-zA-Z!/]")
