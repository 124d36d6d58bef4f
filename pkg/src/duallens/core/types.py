"""Core domain types for the dual-lens retrieval pipeline.

Everything here is a frozen dataclass or an enum with a stable string value,
so records can round-trip through JSONL without loss.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Any


class ValidationError(ValueError):
    """Raised when a record violates a structural invariant."""


class Difficulty(Enum):
    EASY = "Easy"
    MEDIUM = "Medium"
    HARD = "Hard"


class Dynamism(Enum):
    STATIC = "Static"
    SLOW_CHANGING = "Slow-Changing"
    FAST_CHANGING = "Fast-Changing"


class Category(Enum):
    AGGREGATION = "Aggregation"
    COMPARISON = "Comparison"
    FACTUAL_KNOWLEDGE = "FactualKnowledge"
    MULTI_HOP = "MultiHop"
    REASONING = "Reasoning"
    SIMPLE_RECOGNITION = "SimpleRecognition"
    SPATIAL_REASONING = "SpatialReasoning"
    TEMPORAL_UNDERSTANDING = "TemporalUnderstanding"


class RetrievalMode(Enum):
    NONE = "None"
    MANDATORY = "Mandatory"
    DEMAND_ADAPTIVE = "DemandAdaptive"


class Branch(Enum):
    VISUAL = "Visual"
    TEXTUAL = "Textual"


class SearchTool(Enum):
    IMAGE_SEARCH = "ImageSearch"
    TEXT_SEARCH = "TextSearch"


class AnswerMode(Enum):
    DIRECT = "Direct"
    RETRIEVED = "Retrieved"


class ToolKind(Enum):
    DOMAIN_ROUTE = "DomainRoute"
    DIRECT_ANSWER = "DirectAnswer"
    SEARCH_ROUTE = "SearchRoute"
    QUERY_DECOUPLE = "QueryDecouple"
    OBJECT_DETECT = "ObjectDetect"
    IMAGE_SEARCH = "ImageSearch"
    TEXT_SEARCH = "TextSearch"
    PAGE_FETCH = "PageFetch"
    PAGE_PARSE = "PageParse"
    RERANK = "Rerank"
    RAG_ANSWER = "RagAnswer"
    JUDGE = "Judge"


SEARCH_KINDS = frozenset({ToolKind.IMAGE_SEARCH, ToolKind.TEXT_SEARCH})


def _enum_key(text: str) -> str:
    return re.sub(r"[^a-z]", "", text.lower())


def parse_enum(cls: type[Enum], raw: Any) -> Enum:
    """Parse an enum from loose input.

    Accepts the canonical value plus cased/spaced/hyphenated aliases, e.g.
    "Multi-hop" and "Factual Knowledge" map onto Category.MULTI_HOP and
    Category.FACTUAL_KNOWLEDGE.
    """
    if isinstance(raw, cls):
        return raw
    if not isinstance(raw, str):
        raise ValidationError(f"{cls.__name__}: expected string, got {type(raw).__name__}")
    key = _enum_key(raw)
    for member in cls:
        if _enum_key(member.value) == key or _enum_key(member.name) == key:
            return member
    raise ValidationError(f"{cls.__name__}: unknown value {raw!r}")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


@dataclass(frozen=True)
class HopAnnotation:
    """One annotated retrieval hop from the dataset's search log."""

    sub_question: str
    tool: SearchTool
    search_keywords: str | None = None  # required for text search, absent for image search
    url: str | None = None
    snippet: str | None = None

    def __post_init__(self) -> None:
        _require(bool(self.sub_question.strip()), "hop annotation needs a sub_question")
        if self.tool is SearchTool.TEXT_SEARCH:
            _require(bool(self.search_keywords and self.search_keywords.strip()),
                     "text-search hops must carry search_keywords")
        else:
            _require(self.search_keywords is None,
                     "image-search hops must not carry search_keywords")

    def to_dict(self) -> dict[str, Any]:
        return {
            "sub_question": self.sub_question,
            "tool": self.tool.value,
            "search_keywords": self.search_keywords,
            "url": self.url,
            "snippet": self.snippet,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "HopAnnotation":
        return cls(
            sub_question=data["sub_question"],
            tool=parse_enum(SearchTool, data["tool"]),  # type: ignore[arg-type]
            search_keywords=data.get("search_keywords"),
            url=data.get("url"),
            snippet=data.get("snippet"),
        )


@dataclass(frozen=True)
class QueryTask:
    """A single evaluation task: an image-grounded question with annotations."""

    task_id: str
    image: str  # path to the captured frame, resolved by the dataset loader
    question: str
    difficulty: Difficulty
    hops: int
    category: Category
    domain_label: str
    dynamism: Dynamism
    glasses: str
    location: str | None = None
    gold_answer: str | None = None
    search_log: tuple[HopAnnotation, ...] = ()

    def __post_init__(self) -> None:
        _require(bool(self.task_id.strip()), "task_id must be non-empty")
        _require(bool(self.question.strip()), "question must be non-empty")
        _require(1 <= self.hops <= 4, f"hops must be in 1..4, got {self.hops}")
        if self.category is Category.MULTI_HOP:
            _require(self.hops >= 2, "MultiHop tasks need hops >= 2")
        _require(len(self.search_log) <= self.hops,
                 "search_log cannot contain more hops than the task's hop count")
        if not isinstance(self.search_log, tuple):
            object.__setattr__(self, "search_log", tuple(self.search_log))

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "image": self.image,
            "question": self.question,
            "location": self.location,
            "gold_answer": self.gold_answer,
            "difficulty": self.difficulty.value,
            "hops": self.hops,
            "category": self.category.value,
            "domain_label": self.domain_label,
            "dynamism": self.dynamism.value,
            "glasses": self.glasses,
            "search_log": [hop.to_dict() for hop in self.search_log],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "QueryTask":
        return cls(
            task_id=str(data["task_id"]),
            image=data["image"],
            question=data["question"],
            location=data.get("location"),
            gold_answer=data.get("gold_answer"),
            difficulty=parse_enum(Difficulty, data["difficulty"]),  # type: ignore[arg-type]
            hops=int(data["hops"]),
            category=parse_enum(Category, data["category"]),  # type: ignore[arg-type]
            domain_label=data["domain_label"],
            dynamism=parse_enum(Dynamism, data["dynamism"]),  # type: ignore[arg-type]
            glasses=data["glasses"],
            search_log=tuple(HopAnnotation.from_dict(h) for h in data.get("search_log", [])),
        )


@dataclass(frozen=True)
class RetrievalPlan:
    """Search-router output: objects to ground visually, queries to search textually."""

    objects: tuple[str, ...] = ()
    queries: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.objects, tuple):
            object.__setattr__(self, "objects", tuple(self.objects))
        if not isinstance(self.queries, tuple):
            object.__setattr__(self, "queries", tuple(self.queries))
        _require(self.objects or self.queries, "a retrieval plan cannot be empty on both sides")
        _require(len(set(self.objects)) == len(self.objects), "duplicate objects in plan")
        _require(len(set(self.queries)) == len(self.queries), "duplicate queries in plan")

    def to_dict(self) -> dict[str, Any]:
        return {"objects": list(self.objects), "queries": list(self.queries)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RetrievalPlan":
        return cls(objects=tuple(data.get("objects", [])), queries=tuple(data.get("queries", [])))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned detection box in pixel coordinates (x, y = top-left)."""

    x: int
    y: int
    w: int
    h: int
    label: str = ""
    confidence: float = 0.0

    def __post_init__(self) -> None:
        _require(self.w > 0 and self.h > 0, "box width/height must be positive")
        _require(0.0 <= self.confidence <= 1.0, "confidence must lie in [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h,
                "label": self.label, "confidence": self.confidence}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BBox":
        return cls(x=int(data["x"]), y=int(data["y"]), w=int(data["w"]), h=int(data["h"]),
                   label=data.get("label", ""), confidence=float(data.get("confidence", 0.0)))


@dataclass(frozen=True)
class SearchHit:
    """A single web search result."""

    url: str
    title: str = ""
    snippet: str = ""
    position: int = 1  # 1-based rank within its result list

    def __post_init__(self) -> None:
        _require(bool(self.url), "search hit needs a url")
        _require(self.position >= 1, "hit position is 1-based")

    def to_dict(self) -> dict[str, Any]:
        return {"url": self.url, "title": self.title,
                "snippet": self.snippet, "position": self.position}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SearchHit":
        return cls(url=data["url"], title=data.get("title", ""),
                   snippet=data.get("snippet", ""), position=int(data.get("position", 1)))


@dataclass(frozen=True)
class EvidenceChunk:
    """A selected context chunk with its per-modality and fused relevance scores."""

    text: str
    source_url: str
    branch: Branch
    fused_score: float
    rank: int  # 1-based rank after selection
    visual_score: float | None = None
    textual_score: float | None = None

    def __post_init__(self) -> None:
        _require(self.rank >= 1, "chunk rank is 1-based")

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "source_url": self.source_url,
            "branch": self.branch.value,
            "fused_score": self.fused_score,
            "rank": self.rank,
            "visual_score": self.visual_score,
            "textual_score": self.textual_score,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EvidenceChunk":
        return cls(
            text=data["text"],
            source_url=data["source_url"],
            branch=parse_enum(Branch, data["branch"]),  # type: ignore[arg-type]
            fused_score=float(data["fused_score"]),
            rank=int(data["rank"]),
            visual_score=data.get("visual_score"),
            textual_score=data.get("textual_score"),
        )


@dataclass(frozen=True)
class ToolCall:
    """One pipeline step in a trace."""

    kind: ToolKind
    input_digest: str
    cache_hit: bool = False
    duration_ms: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "input_digest": self.input_digest,
                "cache_hit": self.cache_hit, "duration_ms": self.duration_ms}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ToolCall":
        return cls(kind=parse_enum(ToolKind, data["kind"]),  # type: ignore[arg-type]
                   input_digest=data["input_digest"],
                   cache_hit=bool(data.get("cache_hit", False)),
                   duration_ms=float(data.get("duration_ms", 0.0)))


@dataclass(frozen=True)
class AnswerRecord:
    """Full trace of answering one task."""

    task_id: str
    answer: str
    reasoning: str
    mode: AnswerMode
    predicted_domain: str
    plan: RetrievalPlan | None = None
    sub_queries: tuple[str, ...] = ()
    detected_regions: tuple[BBox, ...] = ()
    fetched_urls: tuple[str, ...] = ()
    selected_chunks: tuple[EvidenceChunk, ...] = ()
    tool_calls: tuple[ToolCall, ...] = ()
    wall_time_ms: float = 0.0
    notes: tuple[str, ...] = ()
    error: str | None = None

    def search_calls(self) -> tuple[ToolCall, ...]:
        return tuple(c for c in self.tool_calls if c.kind in SEARCH_KINDS)

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "answer": self.answer,
            "reasoning": self.reasoning,
            "mode": self.mode.value,
            "predicted_domain": self.predicted_domain,
            "plan": self.plan.to_dict() if self.plan else None,
            "sub_queries": list(self.sub_queries),
            "detected_regions": [b.to_dict() for b in self.detected_regions],
            "fetched_urls": list(self.fetched_urls),
            "selected_chunks": [c.to_dict() for c in self.selected_chunks],
            "tool_calls": [c.to_dict() for c in self.tool_calls],
            "wall_time_ms": self.wall_time_ms,
            "notes": list(self.notes),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AnswerRecord":
        plan = data.get("plan")
        return cls(
            task_id=data["task_id"],
            answer=data["answer"],
            reasoning=data.get("reasoning", ""),
            mode=parse_enum(AnswerMode, data["mode"]),  # type: ignore[arg-type]
            predicted_domain=data.get("predicted_domain", "Other"),
            plan=RetrievalPlan.from_dict(plan) if plan else None,
            sub_queries=tuple(data.get("sub_queries", [])),
            detected_regions=tuple(BBox.from_dict(b) for b in data.get("detected_regions", [])),
            fetched_urls=tuple(data.get("fetched_urls", [])),
            selected_chunks=tuple(EvidenceChunk.from_dict(c)
                                  for c in data.get("selected_chunks", [])),
            tool_calls=tuple(ToolCall.from_dict(c) for c in data.get("tool_calls", [])),
            wall_time_ms=float(data.get("wall_time_ms", 0.0)),
            notes=tuple(data.get("notes", [])),
            error=data.get("error"),
        )


@dataclass(frozen=True)
class Judgment:
    """Judge verdict for one task."""

    task_id: str
    accuracy: bool
    judge_raw: str = ""
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"task_id": self.task_id, "accuracy": self.accuracy,
                "judge_raw": self.judge_raw, "flags": list(self.flags)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Judgment":
        return cls(task_id=data["task_id"], accuracy=bool(data["accuracy"]),
                   judge_raw=data.get("judge_raw", ""), flags=tuple(data.get("flags", [])))


def validate_record(record: AnswerRecord) -> list[str]:
    """Check trace invariants; returns a list of violation messages (empty = valid)."""
    problems: list[str] = []
    if record.error is not None:
        # Failed tasks carry partial traces; structural invariants do not apply.
        return problems
    kinds = [c.kind for c in record.tool_calls]
    searches = [k for k in kinds if k in SEARCH_KINDS]
    directs = [k for k in kinds if k is ToolKind.DIRECT_ANSWER]
    if record.mode is AnswerMode.RETRIEVED:
        if not searches:
            problems.append("Retrieved record has no search tool calls")
    else:
        if searches:
            problems.append("Direct record contains search tool calls")
        if len(directs) != 1:
            problems.append(f"Direct record needs exactly one DirectAnswer call, got {len(directs)}")
        if record.plan is not None:
            problems.append("Direct record must not carry a retrieval plan")
    if ToolKind.DOMAIN_ROUTE in kinds and directs:
        if kinds.index(ToolKind.DOMAIN_ROUTE) > kinds.index(ToolKind.DIRECT_ANSWER):
            problems.append("DomainRoute must precede DirectAnswer")
    if ToolKind.SEARCH_ROUTE in kinds and searches:
        first_search = min(i for i, k in enumerate(kinds) if k in SEARCH_KINDS)
        if kinds.index(ToolKind.SEARCH_ROUTE) > first_search:
            problems.append("SearchRoute must precede the first search call")
    return problems


# Fields that describe execution timing or cache state rather than the
# answer itself; normalized away when comparing runs for equivalence.
_EPHEMERAL_TOOLCALL_FIELDS = ("duration_ms", "cache_hit")


def record_fingerprint(record: AnswerRecord) -> dict[str, Any]:
    """Serialize a record with execution metadata (timings, cache hits) blanked.

    Two runs over identical inputs must produce identical fingerprints even
    when one run was served from a warm cache.
    """
    data = record.to_dict()
    data["wall_time_ms"] = 0.0
    for call in data["tool_calls"]:
        for key in _EPHEMERAL_TOOLCALL_FIELDS:
            call[key] = None
    return data


def records_equivalent(a: AnswerRecord, b: AnswerRecord) -> bool:
    return record_fingerprint(a) == record_fingerprint(b)


__all__ = [
    "AnswerMode",
    "AnswerRecord",
    "BBox",
    "Branch",
    "Category",
    "Difficulty",
    "Dynamism",
    "EvidenceChunk",
    "HopAnnotation",
    "Judgment",
    "QueryTask",
    "RetrievalMode",
    "RetrievalPlan",
    "SEARCH_KINDS",
    "SearchHit",
    "SearchTool",
    "ToolCall",
    "ToolKind",
    "ValidationError",
    "parse_enum",
    "record_fingerprint",
    "records_equivalent",
    "validate_record",
]
