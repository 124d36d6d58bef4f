"""Heuristic RAG baselines: no routing, no decoupling, no detection, no rerank.

TextRAG searches the raw question; ImageRAG searches the full resized frame;
MultimodalRAG does both, text snippets first. Snippets are concatenated into
a plain context buffer; hits without a snippet are fetched through the
layer-2 cache and truncated to one chunk length.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Sequence

from ..backends.base import BackendError, Backends, ChatMessage, ChatRequest, \
    ImagePart, TextPart, text_message
from ..backends.mock import normalize_query
from ..cache import TwoLayerCache
from ..core.config import PipelineConfig
from ..core.types import AnswerMode, AnswerRecord, QueryTask, SearchHit, ToolKind
from ..media import ImageBuf
from ..prompts import PromptLibrary, default_library
from ..retriever import _load_page
from ..answerer import prepare_image
from ..trace import Stopwatch, TraceRecorder


class BaselineKind(Enum):
    TEXT_RAG = "TextRAG"
    IMAGE_RAG = "ImageRAG"
    MULTIMODAL_RAG = "MultimodalRAG"


def build_baseline_request(image: ImageBuf, question: str,
                           context_pieces: Sequence[str], cfg: PipelineConfig,
                           prompts: PromptLibrary | None = None) -> ChatRequest:
    lib = prompts or default_library()
    context = "\n".join(f"[{i}] {piece}" for i, piece in enumerate(context_pieces, start=1))
    if not context:
        context = "(no context)"
    user = lib.render("baseline_user", context=context, query=question)
    return ChatRequest(
        messages=(
            text_message("system", lib.get("baseline_system")),
            ChatMessage(role="user", parts=(ImagePart(image), TextPart(user))),
        ),
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
    )


def _snippet_pieces(hits: Sequence[SearchHit], cfg: PipelineConfig,
                    backends: Backends, cache: TwoLayerCache,
                    trace: TraceRecorder, urls: list[str]) -> list[str]:
    pieces: list[str] = []
    for hit in hits:
        urls.append(hit.url)
        if hit.snippet:
            pieces.append(f"{hit.title}: {hit.snippet}" if hit.title else hit.snippet)
            continue
        # No snippet: read the page body instead.
        doc, cache_hit, fetch_ms, parse_ms, error = _load_page(hit.url, backends, cache)
        trace.add(ToolKind.PAGE_FETCH, hit.url, cache_hit, fetch_ms)
        if error is not None:
            trace.note(f"page_error:{hit.url}:{error}")
            continue
        trace.add(ToolKind.PAGE_PARSE, hit.url, cache_hit, parse_ms)
        body = doc.text[:cfg.chunk_size_chars]
        pieces.append(f"{hit.title}: {body}" if hit.title else body)
    return pieces


def answer_baseline_task(kind: BaselineKind, task: QueryTask, cfg: PipelineConfig,
                         backends: Backends, cache: TwoLayerCache,
                         prompts: PromptLibrary | None = None,
                         image_root: str | Path | None = None) -> AnswerRecord:
    total = Stopwatch()
    trace = TraceRecorder()
    image = prepare_image(task, cfg, image_root)

    pieces: list[str] = []
    urls: list[str] = []

    if kind in (BaselineKind.TEXT_RAG, BaselineKind.MULTIMODAL_RAG):
        watch = Stopwatch()
        hits = backends.search.text_search(task.question, cfg.top_n_pages)
        trace.add(ToolKind.TEXT_SEARCH, normalize_query(task.question), False, watch.lap())
        pieces.extend(_snippet_pieces(hits, cfg, backends, cache, trace, urls))
    if kind in (BaselineKind.IMAGE_RAG, BaselineKind.MULTIMODAL_RAG):
        watch = Stopwatch()
        hits = backends.search.image_search(image, cfg.top_n_pages)
        trace.add(ToolKind.IMAGE_SEARCH, f"img:{image.hash16}", False, watch.lap())
        pieces.extend(_snippet_pieces(hits, cfg, backends, cache, trace, urls))

    request = build_baseline_request(image, task.question, pieces, cfg, prompts)
    watch = Stopwatch()
    reply = backends.chat.chat(request, purpose="RagAnswer")
    trace.add(ToolKind.RAG_ANSWER, request.digest(), False, watch.lap())
    trace.note(f"context_pieces:{len(pieces)}")

    return AnswerRecord(
        task_id=task.task_id,
        answer=reply.strip(),
        reasoning="",
        mode=AnswerMode.RETRIEVED,
        predicted_domain="Other",
        fetched_urls=tuple(urls),
        tool_calls=tuple(trace.tool_calls),
        wall_time_ms=total.lap(),
        notes=tuple(trace.notes),
    )


def run_baseline(kind: BaselineKind, tasks: Sequence[QueryTask], cfg: PipelineConfig,
                 backends: Backends, cache: TwoLayerCache,
                 prompts: PromptLibrary | None = None,
                 image_root: str | Path | None = None,
                 jobs: int = 1) -> list[AnswerRecord]:
    def one(task: QueryTask) -> AnswerRecord:
        try:
            return answer_baseline_task(kind, task, cfg, backends, cache,
                                        prompts, image_root)
        except Exception as exc:  # noqa: BLE001 - a bad task must not kill the run
            return AnswerRecord(
                task_id=task.task_id, answer="", reasoning="",
                mode=AnswerMode.DIRECT, predicted_domain="Other",
                notes=("task_failed",), error=f"{type(exc).__name__}: {exc}",
            )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, tasks))
    return [one(task) for task in tasks]


__all__ = ["BaselineKind", "answer_baseline_task", "build_baseline_request",
           "run_baseline"]
