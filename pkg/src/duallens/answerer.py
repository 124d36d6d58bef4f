"""Demand-adaptive answering.

Every task is domain-routed first. In demand-adaptive mode the model then
gets one chance to answer directly; replies containing the no-knowledge
sentinel ("I have no knowledge about ...") trigger the retrieval pipeline.
Mandatory mode always retrieves; None mode never does.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .backends.base import (
    BackendError,
    Backends,
    ChatMessage,
    ChatRequest,
    ImagePart,
    TextPart,
    text_message,
)
from .cache import TwoLayerCache
from .core.config import PipelineConfig
from .core.jsonio import extract_first_json_object
from .core.types import (
    SEARCH_KINDS,
    AnswerMode,
    AnswerRecord,
    QueryTask,
    RetrievalMode,
    RetrievalPlan,
    ToolKind,
)
from .media import ImageBuf, load_image, resize_shortest_edge
from .prompts import PromptLibrary, default_library
from .retriever import RetrievalOutcome, route_search, run_retrieval
from .trace import Stopwatch, TraceRecorder

SENTINEL = "i have no knowledge about"

_SENTENCE_END = re.compile(r"[.!?\n]")


@dataclass(frozen=True)
class DirectOutcome:
    """Result of the direct-answer attempt."""

    answered: bool
    answer: str = ""
    reasoning: str = ""
    lacking: str = ""  # the knowledge clause from the sentinel, when present
    raw: str = ""


def detect_sentinel(reply: str) -> str | None:
    """Return the lacking-knowledge clause if the reply declines to answer.

    Matching is case-insensitive and the clause runs to the end of the
    sentence. The sentinel wins even when the reply also contains JSON.
    """
    lowered = reply.lower()
    idx = lowered.find(SENTINEL)
    if idx < 0:
        return None
    rest = reply[idx + len(SENTINEL):]
    match = _SENTENCE_END.search(rest)
    clause = rest[:match.start()] if match else rest
    return clause.strip().strip("\"'“”").strip()


def _as_text(value: object) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, ensure_ascii=False)


# -- request builders ------------------------------------------------------------

def _domain_lines(cfg: PipelineConfig, prompts: PromptLibrary) -> str:
    descriptions = prompts.domain_descriptions()
    lines = []
    for domain in cfg.domains:
        desc = descriptions.get(domain)
        lines.append(f"- {domain}: {desc}" if desc else f"- {domain}")
    return "\n".join(lines)


def _guideline_line(domain: str, prompts: PromptLibrary) -> str:
    guidelines = prompts.domain_guidelines()
    text = guidelines.get(domain) or guidelines.get("Other", "")
    return f"{domain}: {text}"


def _location_line(location: str | None) -> str:
    if location:
        return f"The location of the image is {location}\n"
    return ""


def build_domain_route_request(image: ImageBuf, question: str, cfg: PipelineConfig,
                               prompts: PromptLibrary | None = None) -> ChatRequest:
    lib = prompts or default_library()
    system = lib.render("domain_router_system", domain_lines=_domain_lines(cfg, lib))
    user = lib.render("domain_router_user", query=question)
    return ChatRequest(
        messages=(
            text_message("system", system),
            ChatMessage(role="user", parts=(ImagePart(image), TextPart(user))),
        ),
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
    )


def build_direct_answer_request(image: ImageBuf, question: str, location: str | None,
                                domain: str, cfg: PipelineConfig,
                                prompts: PromptLibrary | None = None) -> ChatRequest:
    lib = prompts or default_library()
    system = lib.render("direct_answer_system",
                        domain_guidelines=_guideline_line(domain, lib))
    user = lib.render("direct_answer_user",
                      location_line=_location_line(location), query=question)
    return ChatRequest(
        messages=(
            text_message("system", system),
            ChatMessage(role="user", parts=(ImagePart(image), TextPart(user))),
        ),
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
    )


def format_evidence(chunks) -> str:
    if not chunks:
        return "No external evidence was retrieved."
    lines = [f"[{c.rank}] ({c.source_url}) {c.text}" for c in chunks]
    return "\n".join(lines)


def build_rag_request(image: ImageBuf, question: str, location: str | None,
                      domain: str, chunks, cfg: PipelineConfig,
                      prompts: PromptLibrary | None = None) -> ChatRequest:
    lib = prompts or default_library()
    system = lib.render("rag_answer_system",
                        domain_guidelines=_guideline_line(domain, lib))
    user = lib.render("rag_answer_user",
                      location_line=_location_line(location), query=question,
                      evidence=format_evidence(chunks))
    return ChatRequest(
        messages=(
            text_message("system", system),
            ChatMessage(role="user", parts=(ImagePart(image), TextPart(user))),
        ),
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
    )


# -- pipeline stages --------------------------------------------------------------

def route_domain(image: ImageBuf, question: str, cfg: PipelineConfig,
                 backends: Backends, trace: TraceRecorder,
                 prompts: PromptLibrary | None = None) -> str:
    """Classify the question into the configured taxonomy; unknown -> Other."""
    request = build_domain_route_request(image, question, cfg, prompts)
    watch = Stopwatch()
    domain = "Other"
    try:
        reply = backends.chat.chat(request, purpose="DomainRoute")
        data = extract_first_json_object(reply)
        raw = data.get("domain")
        if isinstance(raw, str):
            for candidate in cfg.domains:
                if candidate.lower() == raw.strip().lower():
                    domain = candidate
                    break
            else:
                trace.note(f"domain_out_of_taxonomy:{raw.strip()}")
    except (BackendError, ValueError):
        trace.note("domain_route_fallback")
    trace.add(ToolKind.DOMAIN_ROUTE, request.digest(), False, watch.lap())
    return domain


def direct_answer(image: ImageBuf, question: str, location: str | None, domain: str,
                  cfg: PipelineConfig, backends: Backends, trace: TraceRecorder,
                  prompts: PromptLibrary | None = None) -> DirectOutcome:
    request = build_direct_answer_request(image, question, location, domain, cfg, prompts)
    watch = Stopwatch()
    try:
        reply = backends.chat.chat(request, purpose="DirectAnswer")
    except BackendError as exc:
        trace.add(ToolKind.DIRECT_ANSWER, request.digest(), False, watch.lap())
        trace.note(f"direct_answer_error:{type(exc).__name__}")
        return DirectOutcome(answered=False, lacking="", raw="")
    trace.add(ToolKind.DIRECT_ANSWER, request.digest(), False, watch.lap())

    lacking = detect_sentinel(reply)
    if lacking is not None:
        return DirectOutcome(answered=False, lacking=lacking, raw=reply)
    try:
        data = extract_first_json_object(reply)
        if "answer" not in data:
            raise ValueError("reply JSON lacks an 'answer' field")
        return DirectOutcome(answered=True, answer=_as_text(data["answer"]),
                             reasoning=_as_text(data.get("reasoning", "")), raw=reply)
    except ValueError:
        trace.note("direct_answer_parse_fallback")
        return DirectOutcome(answered=False, lacking="", raw=reply)


def rag_answer(image: ImageBuf, question: str, location: str | None, domain: str,
               chunks, cfg: PipelineConfig, backends: Backends, trace: TraceRecorder,
               prompts: PromptLibrary | None = None) -> tuple[str, str]:
    """Answer with retrieved evidence; empty evidence degrades to direct style."""
    if not chunks:
        trace.note("empty_context")
    request = build_rag_request(image, question, location, domain, chunks, cfg, prompts)
    watch = Stopwatch()
    reply = backends.chat.chat(request, purpose="RagAnswer")
    trace.add(ToolKind.RAG_ANSWER, request.digest(), False, watch.lap())
    try:
        data = extract_first_json_object(reply)
        if "answer" not in data:
            raise ValueError("reply JSON lacks an 'answer' field")
        return _as_text(data["answer"]), _as_text(data.get("reasoning", ""))
    except ValueError:
        trace.note("rag_parse_fallback")
        return reply.strip(), ""


# -- the task driver -----------------------------------------------------------------

def prepare_image(task: QueryTask, cfg: PipelineConfig,
                  image_root: str | Path | None = None) -> ImageBuf:
    path = Path(task.image)
    if image_root is not None and not path.is_absolute():
        path = Path(image_root) / path
    return resize_shortest_edge(load_image(path), cfg.shortest_edge)


def answer_task(task: QueryTask, cfg: PipelineConfig, backends: Backends,
                cache: TwoLayerCache, prompts: PromptLibrary | None = None,
                image_root: str | Path | None = None) -> AnswerRecord:
    """Run the full pipeline for one task and return its trace record."""
    total = Stopwatch()
    trace = TraceRecorder()
    image = prepare_image(task, cfg, image_root)

    domain = route_domain(image, task.question, cfg, backends, trace, prompts)

    answer = ""
    reasoning = ""
    plan: RetrievalPlan | None = None
    outcome: RetrievalOutcome | None = None

    if cfg.retrieval_mode is RetrievalMode.NONE:
        direct = direct_answer(image, task.question, task.location, domain,
                               cfg, backends, trace, prompts)
        if direct.answered:
            answer, reasoning = direct.answer, direct.reasoning
        else:
            # Retrieval is disabled, so the refusal itself is the best output.
            answer = direct.raw.strip()
            trace.note("unanswered_without_retrieval")
    elif cfg.retrieval_mode is RetrievalMode.MANDATORY:
        plan, outcome, answer, reasoning = _retrieve_and_answer(
            image, task, domain, cfg, backends, cache, trace, prompts)
    else:  # demand-adaptive
        direct = direct_answer(image, task.question, task.location, domain,
                               cfg, backends, trace, prompts)
        if direct.answered:
            answer, reasoning = direct.answer, direct.reasoning
        else:
            if direct.lacking:
                trace.note(f"lacking_knowledge:{direct.lacking}")
            plan, outcome, answer, reasoning = _retrieve_and_answer(
                image, task, domain, cfg, backends, cache, trace, prompts)

    searched = any(c.kind in SEARCH_KINDS for c in trace.tool_calls)
    mode = AnswerMode.RETRIEVED if searched else AnswerMode.DIRECT
    return AnswerRecord(
        task_id=task.task_id,
        answer=answer,
        reasoning=reasoning,
        mode=mode,
        predicted_domain=domain,
        plan=plan if mode is AnswerMode.RETRIEVED else None,
        sub_queries=outcome.sub_queries if outcome else (),
        detected_regions=outcome.regions if outcome else (),
        fetched_urls=outcome.urls if outcome else (),
        selected_chunks=outcome.chunks if outcome else (),
        tool_calls=tuple(trace.tool_calls),
        wall_time_ms=total.lap(),
        notes=tuple(trace.notes),
    )


def _retrieve_and_answer(image: ImageBuf, task: QueryTask, domain: str,
                         cfg: PipelineConfig, backends: Backends,
                         cache: TwoLayerCache, trace: TraceRecorder,
                         prompts: PromptLibrary | None
                         ) -> tuple[RetrievalPlan, RetrievalOutcome, str, str]:
    plan = route_search(image, task.question, cfg, backends, trace, prompts)
    outcome = run_retrieval(image, task.question, plan, cfg, backends, cache,
                            trace, prompts)
    answer, reasoning = rag_answer(image, task.question, task.location, domain,
                                   outcome.chunks, cfg, backends, trace, prompts)
    return plan, outcome, answer, reasoning


def run_tasks(tasks, cfg: PipelineConfig, backends: Backends, cache: TwoLayerCache,
              prompts: PromptLibrary | None = None,
              image_root: str | Path | None = None,
              jobs: int = 1) -> list[AnswerRecord]:
    """Answer every task, in dataset order; per-task failures become error records."""

    def one(task: QueryTask) -> AnswerRecord:
        try:
            return answer_task(task, cfg, backends, cache, prompts, image_root)
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


__all__ = [
    "SENTINEL",
    "DirectOutcome",
    "answer_task",
    "build_direct_answer_request",
    "build_domain_route_request",
    "build_rag_request",
    "detect_sentinel",
    "direct_answer",
    "format_evidence",
    "prepare_image",
    "rag_answer",
    "route_domain",
    "run_tasks",
]
