"""Rule-based page reader: HTML to clean text, plus deterministic chunking.

The reader is deliberately dependency-free (stdlib html.parser): parse output
feeds cache persistence and score fusion, so it must be stable across
environments. Parsing is idempotent on its own output: feeding a CleanDoc's
text back through parse_html reproduces the text exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Any

# Subtrees that never contribute readable text.
_SKIP_TAGS = frozenset({"script", "style", "nav", "header", "footer", "form"})

# Elements that open/close a paragraph break in the output.
_BLOCK_TAGS = frozenset({
    "p", "div", "br", "li", "ul", "ol", "dl", "dt", "dd",
    "h1", "h2", "h3", "h4", "h5", "h6",
    "table", "thead", "tbody", "tr", "td", "th",
    "section", "article", "aside", "main", "blockquote", "pre", "hr",
    "figure", "figcaption",
})

_VOID_TAGS = frozenset({"br", "hr", "img", "input", "meta", "link"})

_TAG_LIKE = re.compile(r"<[a-zA-Z!/]")
_RESIDUAL_OPEN = re.compile(r"<(?=[a-zA-Z!/])")
_BLANK_LINE = re.compile(r"\n\s*\n")


class InvalidChunkParams(ValueError):
    """Raised when chunk size/overlap parameters are out of range."""


@dataclass(frozen=True)
class CleanDoc:
    """A parsed page: normalized text with paragraph breaks as blank lines."""

    url: str
    title: str
    text: str

    @property
    def paragraphs(self) -> tuple[str, ...]:
        return tuple(self.text.split("\n\n")) if self.text else ()

    def to_dict(self) -> dict[str, Any]:
        return {"url": self.url, "title": self.title, "text": self.text}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CleanDoc":
        return cls(url=data["url"], title=data.get("title", ""), text=data.get("text", ""))


class _TextExtractor(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.paragraphs: list[list[str]] = [[]]
        self.title_parts: list[str] = []
        self.first_h1_parts: list[str] = []
        self._skip_depth = 0
        self._in_title = False
        self._h1_depth = 0
        self._seen_h1 = False

    def _break(self) -> None:
        if self.paragraphs[-1]:
            self.paragraphs.append([])

    def handle_starttag(self, tag: str, attrs: list) -> None:
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
            return
        if self._skip_depth:
            return
        if tag == "title":
            self._in_title = True
            return
        if tag == "h1" and not self._seen_h1:
            self._h1_depth += 1
        if tag in _BLOCK_TAGS:
            self._break()

    def handle_startendtag(self, tag: str, attrs: list) -> None:
        if self._skip_depth:
            return
        if tag in _BLOCK_TAGS:
            self._break()

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_TAGS:
            if self._skip_depth:
                self._skip_depth -= 1
            return
        if self._skip_depth:
            return
        if tag == "title":
            self._in_title = False
            return
        if tag == "h1" and self._h1_depth:
            self._h1_depth -= 1
            if self._h1_depth == 0:
                self._seen_h1 = True
        if tag in _BLOCK_TAGS and tag not in _VOID_TAGS:
            self._break()

    def handle_data(self, data: str) -> None:
        if self._skip_depth:
            return
        if self._in_title:
            self.title_parts.append(data)
            return
        if self._h1_depth and not self._seen_h1:
            self.first_h1_parts.append(data)
        self.paragraphs[-1].append(data)


def _collapse(text: str) -> str:
    return " ".join(text.split())


def _escape_residual(text: str) -> str:
    # A "<" immediately followed by a letter would read as a tag on re-parse.
    return _RESIDUAL_OPEN.sub("< ", text)


def _decode(raw: bytes | str) -> str:
    if isinstance(raw, bytes):
        return raw.decode("utf-8", errors="replace")
    return raw


def parse_html(raw: bytes | str, url: str = "") -> CleanDoc:
    """Extract readable text from a page.

    HTML input: script/style/nav/header/footer/form subtrees are dropped,
    block elements become paragraph breaks, entities are decoded, whitespace
    inside a paragraph collapses to single spaces. Plain-text input (nothing
    tag-like in it) keeps its blank-line paragraph structure.
    """
    text = _decode(raw)
    if _TAG_LIKE.search(text):
        extractor = _TextExtractor()
        extractor.feed(text)
        extractor.close()
        paragraphs = [_collapse("".join(parts)) for parts in extractor.paragraphs]
        title = _collapse("".join(extractor.title_parts))
        if not title:
            title = _collapse("".join(extractor.first_h1_parts))
        title = _escape_residual(title)
    else:
        paragraphs = [_collapse(p) for p in _BLANK_LINE.split(text)]
        title = ""
    paragraphs = [_escape_residual(p) for p in paragraphs if p]
    return CleanDoc(url=url, title=title, text="\n\n".join(paragraphs))


_SENTENCE_END = frozenset(".!?")


def chunk_spans(text: str, size: int, overlap: int) -> list[tuple[int, int]]:
    """Greedy chunk spans over `text`.

    Each span is at most `size` characters. The cut point for a full window
    prefers the last paragraph boundary inside [start+size-overlap,
    start+size], then the last sentence boundary, then a hard cut at
    start+size. The next span starts `overlap` characters before the previous
    end (always making at least one character of progress).
    """
    if size < 1:
        raise InvalidChunkParams(f"chunk size must be >= 1, got {size}")
    if not 0 <= overlap < size:
        raise InvalidChunkParams(f"overlap must satisfy 0 <= overlap < size, got {overlap}")
    n = len(text)
    spans: list[tuple[int, int]] = []
    start = 0
    while start < n:
        if n - start <= size:
            spans.append((start, n))
            break
        lo = start + size - overlap
        hi = start + size
        end = _paragraph_cut(text, lo, hi)
        if end is None:
            end = _sentence_cut(text, lo, hi)
        if end is None:
            end = hi
        spans.append((start, end))
        start = max(end - overlap, start + 1)
    return spans


def _paragraph_cut(text: str, lo: int, hi: int) -> int | None:
    # Cut right before a blank-line separator, keeping it for the next span.
    # The +2 end lets a separator starting exactly at `hi` count as a boundary.
    best = text.rfind("\n\n", lo, hi + 2)
    return best if lo <= best <= hi else None


def _sentence_cut(text: str, lo: int, hi: int) -> int | None:
    for i in range(hi, lo - 1, -1):
        if text[i - 1] in _SENTENCE_END and (i >= len(text) or text[i].isspace()):
            return i
    return None


def chunk_text(text: str, size: int, overlap: int) -> list[str]:
    return [text[s:e] for s, e in chunk_spans(text, size, overlap)]


__all__ = [
    "CleanDoc",
    "InvalidChunkParams",
    "chunk_spans",
    "chunk_text",
    "parse_html",
]
