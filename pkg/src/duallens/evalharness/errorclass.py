"""Failure taxonomy for incorrectly answered tasks.

The classifier is a first-match cascade over the trace/annotation disagreement:
retrieval-demand misjudgment, improper tool invocation, query-decoupling
shortfall, object-detection miss. Tasks the judge marked correct get no label.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from ..backends.mock import tokenize
from ..core.types import AnswerRecord, Judgment, QueryTask, SearchTool

RETRIEVAL_DEMAND = "RetrievalDemand"
TOOL_INVOCATION = "ToolInvocation"
QUERY_DECOUPLING = "QueryDecoupling"
OBJECT_DETECTION = "ObjectDetection"
MISSING_ANNOTATION = "MissingAnnotation"

ERROR_LABELS = (RETRIEVAL_DEMAND, TOOL_INVOCATION, QUERY_DECOUPLING, OBJECT_DETECTION)

# Function words ignored when matching detected labels against sub-questions.
_STOPWORDS = frozenset(
    "a an the this that these those is are was were be been being do does did "
    "what which who whom whose where when why how of in on at to for from with "
    "about by and or not no it its i you he she they we my your his her their "
    "our me him them us can could will would should shall may might item thing".split())


class MissingAnnotation(ValueError):
    """The task carries no search-log annotation to classify against."""


@dataclass(frozen=True)
class ErrorClassification:
    task_id: str
    label: str | None  # None = task was answered correctly
    low_confidence: bool = False
    detail: str = ""


def _content_tokens(text: str) -> set[str]:
    return tokenize(text) - _STOPWORDS


def classify_error(task: QueryTask, record: AnswerRecord,
                   judgment: Judgment) -> ErrorClassification:
    """Assign one failure label to an incorrect task (first matching rule wins)."""
    if judgment.accuracy:
        return ErrorClassification(task_id=task.task_id, label=None)

    searched = record.search_calls()
    record_multiset = Counter(c.kind.value for c in searched)
    annotated_multiset = Counter(
        "ImageSearch" if hop.tool is SearchTool.IMAGE_SEARCH else "TextSearch"
        for hop in task.search_log)

    if searched and not task.search_log:
        return ErrorClassification(
            task_id=task.task_id, label=RETRIEVAL_DEMAND,
            detail="record retrieved but the annotation expects a direct answer")

    if not task.search_log and not searched:
        raise MissingAnnotation(
            f"task {task.task_id} has no search-log annotation to compare against")

    if record_multiset != annotated_multiset:
        return ErrorClassification(
            task_id=task.task_id, label=TOOL_INVOCATION,
            detail=f"searched {dict(record_multiset)} vs annotated {dict(annotated_multiset)}")

    if task.hops >= 2 and len(record.sub_queries) < task.hops:
        return ErrorClassification(
            task_id=task.task_id, label=QUERY_DECOUPLING,
            detail=f"{len(record.sub_queries)} sub-queries for a {task.hops}-hop task")

    image_hops = [hop for hop in task.search_log if hop.tool is SearchTool.IMAGE_SEARCH]
    if image_hops:
        annotated_tokens: set[str] = set()
        for hop in image_hops:
            annotated_tokens |= _content_tokens(hop.sub_question)
        region_tokens: set[str] = set()
        for box in record.detected_regions:
            region_tokens |= _content_tokens(box.label)
        if not (region_tokens & annotated_tokens):
            return ErrorClassification(
                task_id=task.task_id, label=OBJECT_DETECTION,
                detail="no detected region label matches the annotated image-search target")

    return ErrorClassification(task_id=task.task_id, label=TOOL_INVOCATION,
                               low_confidence=True,
                               detail="no rule matched; defaulting")


def error_breakdown(tasks: Sequence[QueryTask], records: Sequence[AnswerRecord],
                    judgments: Sequence[Judgment]
                    ) -> tuple[dict[str, int], list[ErrorClassification]]:
    """Classify every judged task; returns (label counts, classifications).

    Tasks that cannot be classified for lack of annotation are counted under
    "MissingAnnotation".
    """
    record_by_id = {r.task_id: r for r in records}
    task_by_id = {t.task_id: t for t in tasks}
    counts: Counter = Counter()
    out: list[ErrorClassification] = []
    for judgment in judgments:
        task = task_by_id.get(judgment.task_id)
        record = record_by_id.get(judgment.task_id)
        if task is None or record is None:
            continue
        try:
            cls = classify_error(task, record, judgment)
        except MissingAnnotation:
            counts[MISSING_ANNOTATION] += 1
            out.append(ErrorClassification(task_id=task.task_id,
                                           label=MISSING_ANNOTATION,
                                           low_confidence=True,
                                           detail="no annotation"))
            continue
        out.append(cls)
        if cls.label is not None:
            counts[cls.label] += 1
    return dict(counts), out


__all__ = [
    "ERROR_LABELS",
    "ErrorClassification",
    "MISSING_ANNOTATION",
    "MissingAnnotation",
    "OBJECT_DETECTION",
    "QUERY_DECOUPLING",
    "RETRIEVAL_DEMAND",
    "TOOL_INVOCATION",
    "classify_error",
    "error_breakdown",
]
