from __future__ import annotations

import pytest

from duallens.core.types import (
    AnswerMode,
    AnswerRecord,
    Judgment,
    ToolCall,
    ToolKind,
)
from duallens.evalharness.errorclass import (
    ERROR_LABELS,
    MISSING_ANNOTATION,
    OBJECT_DETECTION,
    QUERY_DECOUPLING,
    RETRIEVAL_DEMAND,
    TOOL_INVOCATION,
    MissingAnnotation,
    classify_error,
    error_breakdown,
)


def _by_id(items):
    return {x.task_id: x for x in items}


def test_corpus_failures_land_on_distinct_labels(corpus, full_run):
    records, judgments = full_run
    tasks = _by_id(corpus.tasks)
    recs = _by_id(records)
    juds = _by_id(judgments)

    expectations = {
        "t10": (TOOL_INVOCATION, True),
        "t11": (RETRIEVAL_DEMAND, False),
        "t12": (QUERY_DECOUPLING, False),
        "t13": (OBJECT_DETECTION, False),
    }
    for task_id, (label, low_confidence) in expectations.items():
        cls = classify_error(tasks[task_id], recs[task_id], juds[task_id])
        assert cls.label == label, task_id
        assert cls.low_confidence is low_confidence, task_id
        assert cls.detail


def test_correct_tasks_get_no_label(corpus, full_run):
    records, judgments = full_run
    tasks = _by_id(corpus.tasks)
    recs = _by_id(records)
    correct = next(j for j in judgments if j.accuracy)
    cls = classify_error(tasks[correct.task_id], recs[correct.task_id], correct)
    assert cls.label is None
    assert not cls.low_confidence


def test_direct_task_without_annotation_raises(corpus, full_run):
    records, _ = full_run
    tasks = _by_id(corpus.tasks)
    recs = _by_id(records)
    # t02 never searched and its annotation is empty: nothing to compare.
    forced_wrong = Judgment(task_id="t02", accuracy=False)
    with pytest.raises(MissingAnnotation):
        classify_error(tasks["t02"], recs["t02"], forced_wrong)


def test_tool_multiset_mismatch_is_tool_invocation(corpus, full_run):
    records, _ = full_run
    tasks = _by_id(corpus.tasks)
    # t13's annotation expects an image search; hand the classifier a record
    # that ran a text search instead.
    record = AnswerRecord(
        task_id="t13", answer="wrong", reasoning="", mode=AnswerMode.RETRIEVED,
        predicted_domain="Plant",
        tool_calls=(ToolCall(kind=ToolKind.TEXT_SEARCH, input_digest="q"),))
    cls = classify_error(tasks["t13"], record, Judgment(task_id="t13", accuracy=False))
    assert cls.label == TOOL_INVOCATION
    assert not cls.low_confidence
    assert "searched" in cls.detail


def test_error_breakdown_counts(corpus, full_run):
    records, judgments = full_run
    counts, classifications = error_breakdown(corpus.tasks, records, judgments)
    assert counts == {
        TOOL_INVOCATION: 1,
        RETRIEVAL_DEMAND: 1,
        QUERY_DECOUPLING: 1,
        OBJECT_DETECTION: 1,
    }
    assert len(classifications) == 20
    labelled = {c.task_id: c.label for c in classifications if c.label}
    assert set(labelled) == {"t10", "t11", "t12", "t13"}
    assert all(c.label in ERROR_LABELS or c.label is None for c in classifications)


def test_error_breakdown_buckets_missing_annotation(corpus, full_run):
    records, judgments = full_run
    # Force every judgment wrong: the direct-answer tasks have no annotation
    # and must be counted under the MissingAnnotation bucket, not crash.
    all_wrong = [Judgment(task_id=j.task_id, accuracy=False) for j in judgments]
    counts, classifications = error_breakdown(corpus.tasks, records, all_wrong)
    direct_tasks = sum(1 for t in corpus.tasks if not t.search_log)
    # t11 searched despite its empty annotation, so it lands on RetrievalDemand.
    assert counts[MISSING_ANNOTATION] == direct_tasks - 1
    assert counts[RETRIEVAL_DEMAND] == 1
    assert sum(counts.values()) == 20
    flagged = [c for c in classifications if c.label == MISSING_ANNOTATION]
    assert all(c.low_confidence for c in flagged)


def test_error_breakdown_skips_unmatched_ids(corpus, full_run):
    records, judgments = full_run
    extra = list(judgments) + [Judgment(task_id="ghost", accuracy=False)]
    counts, classifications = error_breakdown(corpus.tasks, records, extra)
    assert len(classifications) == 20
    assert sum(counts.values()) == 4
