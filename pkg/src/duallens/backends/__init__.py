"""Backend adapters: abstract contracts, offline mocks, live HTTP clients."""

from .base import (
    BackendError,
    BackendUnavailable,
    Backends,
    CallLog,
    CallLogEntry,
    ChatBackend,
    ChatMessage,
    ChatRequest,
    DetectorBackend,
    FetchBackend,
    HttpError,
    ImagePart,
    InvalidUrl,
    LengthMismatch,
    MalformedResponse,
    QuotaExceeded,
    RerankBackend,
    SearchBackend,
    TextPart,
    Timeout,
    chat_digest,
    clamp_scores,
    retry_call,
    text_message,
    validate_hits,
)
from .live import LiveSettings, load_live_backends
from .mock import load_mock_backends, normalize_query, tokenize

__all__ = [name for name in dir() if not name.startswith("_")]
