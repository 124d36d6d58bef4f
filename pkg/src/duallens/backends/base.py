"""Backend contracts shared by the mock and live adapters.

Every external capability (chat, detection, reranking, search, page fetch)
sits behind one small interface. Adapters log each attempt to a CallLog so
tests can count backend traffic without instrumenting the pipeline.
"""

from __future__ import annotations

import abc
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..core.jsonio import canonical_json, digest16
from ..media import ImageBuf
from ..core.types import BBox, SearchHit


class BackendError(Exception):
    """Base class for all backend failures."""


class BackendUnavailable(BackendError):
    """The backend cannot serve requests (network down, missing fixture...)."""


class MalformedResponse(BackendError):
    """The backend replied with something the adapter cannot interpret."""


class Timeout(BackendError):
    """The backend did not answer within the deadline."""


class QuotaExceeded(BackendError):
    """The backend rejected the request for rate/quota reasons."""


class InvalidUrl(BackendError):
    """The fetch target is not a valid http(s) URL."""


class LengthMismatch(MalformedResponse):
    """A reranker returned a score list whose length differs from the input."""


class HttpError(BackendError):
    """A fetch returned an HTTP error status."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(message or f"HTTP {status}")
        self.status = status


@dataclass(frozen=True)
class CallLogEntry:
    component: str
    operation: str
    input_digest: str
    timestamp: float


class CallLog:
    """Thread-safe, append-only record of backend invocations."""

    def __init__(self) -> None:
        self._entries: list[CallLogEntry] = []
        self._lock = threading.Lock()

    def record(self, component: str, operation: str, input_digest: str) -> None:
        entry = CallLogEntry(component, operation, input_digest, time.monotonic())
        with self._lock:
            self._entries.append(entry)

    def entries(self) -> list[CallLogEntry]:
        with self._lock:
            return list(self._entries)

    def operations(self) -> list[str]:
        return [e.operation for e in self.entries()]

    def count(self, operation: str | None = None, component: str | None = None) -> int:
        total = 0
        for e in self.entries():
            if operation is not None and e.operation != operation:
                continue
            if component is not None and e.component != component:
                continue
            total += 1
        return total

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


# --- Chat request model -----------------------------------------------------

@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    image: ImageBuf


Part = TextPart | ImagePart


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    parts: tuple[Part, ...]


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 1024

    def digest(self) -> str:
        return chat_digest(self)


def text_message(role: str, text: str) -> ChatMessage:
    return ChatMessage(role=role, parts=(TextPart(text),))


def chat_digest(req: ChatRequest) -> str:
    """Canonical request digest; images contribute their content hash only."""
    payload: list = []
    for msg in req.messages:
        parts = []
        for part in msg.parts:
            if isinstance(part, TextPart):
                parts.append({"text": part.text})
            else:
                parts.append({"image": part.image.content_hash})
        payload.append({"role": msg.role, "parts": parts})
    return digest16(canonical_json(
        {"messages": payload, "temperature": req.temperature, "max_tokens": req.max_tokens}))


# --- Backend interfaces ------------------------------------------------------

class ChatBackend(abc.ABC):
    """Vision-language chat completion."""

    @abc.abstractmethod
    def chat(self, request: ChatRequest, purpose: str = "Chat") -> str:
        """Return the assistant's reply text. `purpose` labels the call log entry."""


class DetectorBackend(abc.ABC):
    """Open-vocabulary object detection."""

    @abc.abstractmethod
    def detect(self, image: ImageBuf, label: str) -> list[BBox]:
        """Return candidate boxes for `label`, best first."""


class RerankBackend(abc.ABC):
    """Relevance scoring of text chunks against a query or an image."""

    @abc.abstractmethod
    def rerank_text(self, query: str, chunks: Sequence[str]) -> list[float]:
        ...

    @abc.abstractmethod
    def rerank_image(self, image: ImageBuf, chunks: Sequence[str]) -> list[float]:
        ...


class SearchBackend(abc.ABC):
    """Web search over text queries and image content."""

    @abc.abstractmethod
    def text_search(self, query: str, top_n: int) -> list[SearchHit]:
        ...

    @abc.abstractmethod
    def image_search(self, image: ImageBuf, top_n: int) -> list[SearchHit]:
        ...


class FetchBackend(abc.ABC):
    """Raw page retrieval."""

    @abc.abstractmethod
    def fetch_page(self, url: str) -> bytes:
        ...


@dataclass
class Backends:
    """The full set of capabilities the pipeline needs, plus the shared log."""

    chat: ChatBackend
    detector: DetectorBackend
    reranker: RerankBackend
    search: SearchBackend
    fetcher: FetchBackend
    call_log: CallLog = field(default_factory=CallLog)


# --- Shared helpers -----------------------------------------------------------

def clamp_scores(scores: Sequence[float], expected: int) -> list[float]:
    """Validate reranker output length and clamp every score into [0, 1]."""
    if len(scores) != expected:
        raise LengthMismatch(f"expected {expected} scores, got {len(scores)}")
    return [min(1.0, max(0.0, float(s))) for s in scores]


def retry_call(fn: Callable[[], object], retries: int,
               retry_on: tuple[type[BaseException], ...] = (Timeout,)) -> object:
    """Run `fn` up to retries+1 times, retrying only on the given errors."""
    attempts = retries + 1
    for attempt in range(attempts):
        try:
            return fn()
        except retry_on:
            if attempt == attempts - 1:
                raise
    raise AssertionError("unreachable")


def validate_hits(hits: Sequence[SearchHit]) -> list[SearchHit]:
    """Check that result positions are strictly increasing."""
    last = 0
    for hit in hits:
        if hit.position <= last:
            raise MalformedResponse(
                f"search hit positions must be strictly increasing, got {hit.position} after {last}")
        last = hit.position
    return list(hits)


__all__ = [
    "BackendError",
    "BackendUnavailable",
    "Backends",
    "CallLog",
    "CallLogEntry",
    "ChatBackend",
    "ChatMessage",
    "ChatRequest",
    "DetectorBackend",
    "FetchBackend",
    "HttpError",
    "ImagePart",
    "InvalidUrl",
    "LengthMismatch",
    "MalformedResponse",
    "Part",
    "QuotaExceeded",
    "RerankBackend",
    "SearchBackend",
    "TextPart",
    "Timeout",
    "chat_digest",
    "clamp_scores",
    "retry_call",
    "text_message",
    "validate_hits",
]
