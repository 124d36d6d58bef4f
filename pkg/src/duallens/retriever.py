"""Dual-branch retrieval: search routing, visual grounding, query decoupling,
page reading and score-fused chunk selection.

The visual branch detects the routed objects, crops them and runs one image
search per region; the textual branch decouples the routed queries into
single-hop sub-queries and searches each one independently. The two URL sets
are merged (set union, first occurrence wins), fetched once each through the
layer-2 cache, chunked, and scored against both the image and the question.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .backends.base import (
    BackendError,
    Backends,
    ChatMessage,
    ChatRequest,
    ImagePart,
    TextPart,
    text_message,
)
from .backends.mock import normalize_query
from .cache import TwoLayerCache
from .core.config import PipelineConfig
from .core.jsonio import extract_first_json_object
from .core.types import BBox, Branch, EvidenceChunk, RetrievalPlan, ToolKind
from .media import EmptyRegion, ImageBuf, crop
from .prompts import PromptLibrary, default_library
from .reader import CleanDoc, chunk_text, parse_html
from .rerank import fuse_scores, select_chunks
from .trace import Stopwatch, TraceRecorder

FULL_FRAME = None  # sentinel label for full-frame fallback grounding


@dataclass
class RetrievalOutcome:
    plan: RetrievalPlan
    sub_queries: tuple[str, ...] = ()
    regions: tuple[BBox, ...] = ()
    urls: tuple[str, ...] = ()
    chunks: tuple[EvidenceChunk, ...] = ()


# -- request builders ---------------------------------------------------------

def build_search_route_request(image: ImageBuf, question: str, cfg: PipelineConfig,
                               prompts: PromptLibrary | None = None) -> ChatRequest:
    lib = prompts or default_library()
    system = lib.get("search_router_system")
    user = lib.render("search_router_user", query=question)
    return ChatRequest(
        messages=(
            text_message("system", system),
            ChatMessage(role="user", parts=(ImagePart(image), TextPart(user))),
        ),
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
    )


def build_decouple_request(query: str, cfg: PipelineConfig,
                           prompts: PromptLibrary | None = None) -> ChatRequest:
    lib = prompts or default_library()
    return ChatRequest(
        messages=(
            text_message("system", lib.get("query_decoupler_system")),
            text_message("user", lib.render("query_decoupler_user", query=query)),
        ),
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
    )


# -- plan / sub-query parsing ---------------------------------------------------

def _clean_strings(values: object, limit: int) -> tuple[str, ...]:
    out: list[str] = []
    if isinstance(values, list):
        for v in values:
            if isinstance(v, str):
                v = v.strip()
                if v and v not in out:
                    out.append(v)
    return tuple(out[:limit])


def route_search(image: ImageBuf, question: str, cfg: PipelineConfig,
                 backends: Backends, trace: TraceRecorder,
                 prompts: PromptLibrary | None = None) -> RetrievalPlan:
    """Ask the model what to look up; fall back to a raw-question text plan."""
    request = build_search_route_request(image, question, cfg, prompts)
    watch = Stopwatch()
    try:
        reply = backends.chat.chat(request, purpose="SearchRoute")
        data = extract_first_json_object(reply)
        objects = _clean_strings(data.get("objects"), cfg.max_objects)
        queries = _clean_strings(data.get("queries"), cfg.max_subqueries)
        if not objects and not queries:
            raise ValueError("empty plan")
        plan = RetrievalPlan(objects=objects, queries=queries)
    except (BackendError, ValueError):
        trace.note("search_route_fallback")
        plan = RetrievalPlan(objects=(), queries=(question,))
    trace.add(ToolKind.SEARCH_ROUTE, request.digest(), False, watch.lap())
    return plan


def decouple_query(query: str, cfg: PipelineConfig, backends: Backends,
                   trace: TraceRecorder,
                   prompts: PromptLibrary | None = None) -> list[str]:
    """Split one routed query into single-hop sub-queries; falls back to itself."""
    request = build_decouple_request(query, cfg, prompts)
    watch = Stopwatch()
    try:
        reply = backends.chat.chat(request, purpose="QueryDecouple")
        data = extract_first_json_object(reply)
        subs = list(_clean_strings(data.get("sub_queries"), cfg.max_subqueries))
        if not subs:
            raise ValueError("empty sub-query list")
    except (BackendError, ValueError):
        trace.note("decouple_fallback")
        subs = [query]
    trace.add(ToolKind.QUERY_DECOUPLE, request.digest(), False, watch.lap())
    return subs


# -- visual grounding -------------------------------------------------------------

def ground_objects(image: ImageBuf, labels: Sequence[str | None], cfg: PipelineConfig,
                   backends: Backends, trace: TraceRecorder
                   ) -> list[tuple[str | None, ImageBuf, BBox | None]]:
    """Resolve each routed object label to an image region.

    With the detector enabled, the best box per label is cropped; labels with
    no detection fall back to the full frame. With the detector disabled (or
    unavailable) every label maps to the full resized frame.
    """
    grounded: list[tuple[str | None, ImageBuf, BBox | None]] = []
    for label in labels:
        if label is FULL_FRAME or not cfg.use_object_detector:
            grounded.append((label, image, None))
            continue
        watch = Stopwatch()
        box: BBox | None = None
        try:
            boxes = backends.detector.detect(image, label)
            box = boxes[0] if boxes else None
        except BackendError:
            trace.note(f"detector_unavailable:{label}")
        trace.add(ToolKind.OBJECT_DETECT, f"{image.hash16}|{label}", False, watch.lap())
        if box is None:
            trace.note(f"no_detection:{label}")
            grounded.append((label, image, None))
            continue
        try:
            grounded.append((label, crop(image, box), box))
        except EmptyRegion:
            trace.note(f"empty_region:{label}")
            grounded.append((label, image, None))
    return grounded


# -- branch search ------------------------------------------------------------------

def _search_visual(image: ImageBuf, labels: Sequence[str | None], cfg: PipelineConfig,
                   backends: Backends, cache: TwoLayerCache, trace: TraceRecorder
                   ) -> tuple[list[str], list[BBox]]:
    urls: list[str] = []
    boxes: list[BBox] = []
    for label, region, box in ground_objects(image, labels, cfg, backends, trace):
        if box is not None:
            boxes.append(box)
        key = f"img:{region.content_hash}"

        def thunk(r: ImageBuf = region) -> list[str]:
            hits = backends.search.image_search(r, cfg.top_n_pages)
            return [h.url for h in hits]

        watch = Stopwatch()
        found, hit = cache.get_or_search(key, thunk)
        trace.add(ToolKind.IMAGE_SEARCH, f"img:{region.hash16}", hit, watch.lap())
        urls.extend(found)
    return urls, boxes


def _search_textual(sub_queries: Sequence[str], cfg: PipelineConfig,
                    backends: Backends, cache: TwoLayerCache, trace: TraceRecorder
                    ) -> list[str]:
    urls: list[str] = []
    for query in sub_queries:
        key = normalize_query(query)

        def thunk(q=query) -> list[str]:
            hits = backends.search.text_search(q, cfg.top_n_pages)
            return [h.url for h in hits]

        watch = Stopwatch()
        found, hit = cache.get_or_search(key, thunk)
        trace.add(ToolKind.TEXT_SEARCH, key, hit, watch.lap())
        urls.extend(found)
    return urls


# -- page loading ------------------------------------------------------------------

def _load_page(url: str, backends: Backends, cache: TwoLayerCache
               ) -> tuple[CleanDoc | None, bool, float, float, str | None]:
    """Returns (doc, cache_hit, fetch_ms, parse_ms, error)."""
    timings = {"fetch": 0.0, "parse": 0.0}

    def thunk() -> CleanDoc:
        watch = Stopwatch()
        raw = backends.fetcher.fetch_page(url)
        timings["fetch"] = watch.lap()
        backends.call_log.record("reader", "parse_page", url)
        doc = parse_html(raw, url)
        timings["parse"] = watch.lap()
        return doc

    try:
        doc, hit = cache.get_or_parse(url, thunk)
    except BackendError as exc:
        return None, False, timings["fetch"], timings["parse"], f"{type(exc).__name__}"
    return doc, hit, timings["fetch"], timings["parse"], None


# -- full retrieval ---------------------------------------------------------------

def run_retrieval(image: ImageBuf, question: str, plan: RetrievalPlan,
                  cfg: PipelineConfig, backends: Backends, cache: TwoLayerCache,
                  trace: TraceRecorder, prompts: PromptLibrary | None = None,
                  urls_only: bool = False) -> RetrievalOutcome:
    """Execute both retrieval branches for a routed plan and select evidence."""
    v_enabled = Branch.VISUAL in cfg.branches
    t_enabled = Branch.TEXTUAL in cfg.branches

    labels: list[str | None] = list(plan.objects) if v_enabled else []
    t_queries: list[str] = list(plan.queries) if t_enabled else []

    # Fallbacks guarantee at least one search whenever retrieval is dispatched.
    if v_enabled and not labels and not t_queries:
        labels = [FULL_FRAME]
        trace.note("visual_full_frame_fallback")
    if t_enabled and not t_queries and not labels:
        t_queries = [question]
        trace.note("textual_raw_question_fallback")

    v_trace = TraceRecorder()
    t_trace = TraceRecorder()

    # Resolve sub-queries first (chat calls stay sequential and ordered).
    sub_queries: list[str] = []
    if t_queries:
        if cfg.use_query_decoupler:
            for q in t_queries:
                for sub in decouple_query(q, cfg, backends, t_trace, prompts):
                    if sub not in sub_queries:
                        sub_queries.append(sub)
            sub_queries = sub_queries[:cfg.max_subqueries]
        else:
            sub_queries = [question]

    def visual_work() -> tuple[list[str], list[BBox]]:
        if not labels:
            return [], []
        return _search_visual(image, labels, cfg, backends, cache, v_trace)

    def textual_work() -> list[str]:
        if not sub_queries:
            return []
        return _search_textual(sub_queries, cfg, backends, cache, t_trace)

    if cfg.parallelism > 1 and labels and sub_queries:
        with ThreadPoolExecutor(max_workers=2) as pool:
            v_future = pool.submit(visual_work)
            t_future = pool.submit(textual_work)
            v_urls, boxes = v_future.result()
            t_urls = t_future.result()
    else:
        v_urls, boxes = visual_work()
        t_urls = textual_work()

    # Merge traces deterministically: visual branch first, then textual.
    trace.extend(v_trace)
    trace.extend(t_trace)

    # Set-union of both branches; the first branch to produce a URL names it.
    url_branch: dict[str, Branch] = {}
    for url in v_urls:
        url_branch.setdefault(url, Branch.VISUAL)
    for url in t_urls:
        url_branch.setdefault(url, Branch.TEXTUAL)
    urls = list(url_branch.keys())

    outcome = RetrievalOutcome(plan=plan, sub_queries=tuple(sub_queries),
                               regions=tuple(boxes), urls=tuple(urls))
    if urls_only or not urls:
        if not urls:
            trace.note("no_urls")
        return outcome

    # Fetch + parse each URL once, through the layer-2 cache.
    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            loaded = list(pool.map(lambda u: _load_page(u, backends, cache), urls))
    else:
        loaded = [_load_page(u, backends, cache) for u in urls]

    docs: list[tuple[str, CleanDoc]] = []
    for url, (doc, hit, fetch_ms, parse_ms, error) in zip(urls, loaded):
        trace.add(ToolKind.PAGE_FETCH, url, hit, fetch_ms)
        if error is not None:
            trace.note(f"page_error:{url}:{error}")
            continue
        trace.add(ToolKind.PAGE_PARSE, url, hit, parse_ms)
        docs.append((url, doc))  # type: ignore[arg-type]

    # Chunk in URL order; tie keys are (source position, chunk index).
    texts: list[str] = []
    meta: list[tuple[str, Branch, int, int]] = []
    for pos, (url, doc) in enumerate(docs):
        if not doc.text:
            continue
        for idx, piece in enumerate(chunk_text(doc.text, cfg.chunk_size_chars,
                                               cfg.chunk_overlap_chars)):
            texts.append(piece)
            meta.append((url, url_branch[url], pos, idx))

    if not texts:
        trace.note("no_chunks")
        return outcome

    watch = Stopwatch()
    visual_scores = backends.reranker.rerank_image(image, texts)
    textual_scores = backends.reranker.rerank_text(question, texts)
    fused = fuse_scores(visual_scores, textual_scores,
                        cfg.visual_weight, cfg.textual_weight)
    picked = select_chunks(fused, [(m[2], m[3]) for m in meta],
                           cfg.score_threshold, cfg.top_k_chunks)
    trace.add(ToolKind.RERANK, f"chunks:{len(texts)}", False, watch.lap())

    chunks = tuple(
        EvidenceChunk(
            text=texts[i],
            source_url=meta[i][0],
            branch=meta[i][1],
            fused_score=fused[i],
            rank=rank,
            visual_score=visual_scores[i],
            textual_score=textual_scores[i],
        )
        for rank, i in enumerate(picked, start=1)
    )
    outcome.chunks = chunks
    return outcome


__all__ = [
    "FULL_FRAME",
    "RetrievalOutcome",
    "build_decouple_request",
    "build_search_route_request",
    "decouple_query",
    "ground_objects",
    "route_search",
    "run_retrieval",
]
