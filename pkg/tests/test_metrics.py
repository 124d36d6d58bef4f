from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duallens.core.types import AnswerMode, AnswerRecord, Judgment, ToolCall, ToolKind
from duallens.evalharness.metrics import (
    SLICE_DIMENSIONS,
    DisjointTaskSets,
    EvalReport,
    SliceStat,
    aggregate,
    display_round,
    format_report_csv,
    format_report_table,
    mean_tool_usage,
    overlap,
    overlap_matrix,
    seeking_bucket,
)


@pytest.mark.parametrize("value, places, expected", [
    (0.005, 2, 0.01),       # half rounds up, not to even
    (2.675, 2, 2.68),
    (44.095, 2, 44.10),
    (0.004999, 2, 0.0),
    (-0.005, 2, -0.01),     # ties move away from zero
    (83.0333333, 2, 83.03),
    (1.5, 0, 2.0),
])
def test_display_round_is_half_up(value, places, expected):
    assert display_round(value, places) == expected


def test_slice_stat_accuracy_and_display():
    assert SliceStat(correct=2011, total=2422).accuracy == pytest.approx(
        100.0 * 2011 / 2422)
    empty = SliceStat(correct=0, total=0)
    assert empty.accuracy is None
    assert empty.display() == "n/a"
    assert SliceStat(correct=1, total=3).display() == "33.33"
    d = SliceStat(correct=1, total=3).to_dict()
    assert d["accuracy_2dp"] == 33.33


def _search_record(task_id, n_text=0, n_image=0):
    calls = [ToolCall(kind=ToolKind.TEXT_SEARCH, input_digest=f"q{i}")
             for i in range(n_text)]
    calls += [ToolCall(kind=ToolKind.IMAGE_SEARCH, input_digest=f"img:{i}")
              for i in range(n_image)]
    mode = AnswerMode.RETRIEVED if calls else AnswerMode.DIRECT
    return AnswerRecord(task_id=task_id, answer="a", reasoning="", mode=mode,
                        predicted_domain="Other", tool_calls=tuple(calls))


def test_seeking_bucket_classification():
    assert seeking_bucket(None) == "None"
    assert seeking_bucket(_search_record("t", 0, 0)) == "None"
    assert seeking_bucket(_search_record("t", 1, 0)) == "Text"
    assert seeking_bucket(_search_record("t", 0, 2)) == "Image"
    assert seeking_bucket(_search_record("t", 2, 1)) == "Both"


def test_mean_tool_usage_counts_search_calls():
    records = [_search_record("a", 2, 1), _search_record("b"), _search_record("c", 1)]
    assert mean_tool_usage(records) == pytest.approx(4 / 3)
    assert mean_tool_usage([]) == 0.0


def test_aggregate_slices_against_corpus(corpus, full_run):
    records, judgments = full_run
    report = aggregate(corpus.tasks, records, judgments, run_label="corpus")
    assert report.overall.total == 20
    assert report.overall.correct == 16
    assert report.overall.accuracy == pytest.approx(80.0)
    assert report.mean_tool_usage == pytest.approx(1.0)
    assert set(report.slices) == set(SLICE_DIMENSIONS)

    seeking = report.slices["seeking"]
    as_pairs = {b: (s.correct, s.total) for b, s in seeking.items()}
    assert as_pairs == {"Both": (3, 3), "Image": (2, 4), "None": (7, 7),
                        "Text": (4, 6)}
    hop = report.slices["hop_class"]
    assert hop["1-hop"].total + hop["multi-hop"].total == 20
    # Buckets are sorted by name inside each dimension.
    assert list(seeking) == sorted(seeking)
    assert sum(s.total for s in report.slices["domain"].values()) == 20


def test_aggregate_skips_unknown_ids_and_computes_gain(corpus, full_run):
    records, judgments = full_run
    extra = judgments + [Judgment(task_id="ghost", accuracy=True)]
    report = aggregate(corpus.tasks, records, extra, baseline_accuracy=70.0)
    assert report.overall.total == 20  # the ghost judgment is ignored
    assert report.gain_vs_baseline == pytest.approx(10.0)
    as_dict = report.to_dict()
    assert as_dict["overall"]["accuracy_2dp"] == 80.0
    assert as_dict["gain_vs_baseline_2dp"] == 10.0


def test_report_formatting(corpus, full_run):
    records, judgments = full_run
    report = aggregate(corpus.tasks, records, judgments, run_label="corpus")
    table = format_report_table(report)
    assert "Run: corpus" in table
    assert "Overall accuracy: 80.00 (16/20)" in table
    assert "[seeking]" in table
    csv_text = format_report_csv(report)
    assert csv_text.splitlines()[0] == "dimension,bucket,correct,total,accuracy"
    assert "overall,overall,16,20,80.00" in csv_text


def _judgments(mapping):
    return [Judgment(task_id=k, accuracy=v) for k, v in mapping.items()]


def test_overlap_jaccard():
    a = _judgments({"1": True, "2": True, "3": False, "4": False})
    b = _judgments({"1": True, "2": False, "3": True, "4": False})
    # correct sets {1,2} and {1,3}: intersection 1, union 3.
    assert overlap(a, b) == pytest.approx(100.0 / 3)
    assert overlap(a, a) == 100.0
    all_wrong = _judgments({"1": False, "2": False})
    assert overlap(all_wrong, all_wrong) == 100.0
    disjoint = _judgments({"1": True, "2": False})
    flipped = _judgments({"1": False, "2": True})
    assert overlap(disjoint, flipped) == 0.0


def test_overlap_requires_same_task_ids():
    with pytest.raises(DisjointTaskSets):
        overlap(_judgments({"1": True}), _judgments({"2": True}))


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.integers(0, 20).map(str), st.tuples(st.booleans(), st.booleans()),
                       min_size=1, max_size=20))
def test_overlap_is_symmetric_and_bounded(table):
    a = _judgments({k: v[0] for k, v in table.items()})
    b = _judgments({k: v[1] for k, v in table.items()})
    ab = overlap(a, b)
    assert ab == overlap(b, a)
    assert 0.0 <= ab <= 100.0


def test_overlap_matrix_shape():
    runs = {
        "full": _judgments({"1": True, "2": False}),
        "ablated": _judgments({"1": True, "2": True}),
    }
    matrix = overlap_matrix(runs)
    assert matrix["full"]["full"] == 100.0
    assert matrix["full"]["ablated"] == matrix["ablated"]["full"] == 50.0
    with pytest.raises(ValueError):
        overlap_matrix({"only": runs["full"]})


def test_report_requires_known_dimension(corpus):
    from duallens.evalharness.metrics import _bucket_of

    with pytest.raises(ValueError, match="unknown slice dimension"):
        _bucket_of("mood", corpus.tasks[0], None)


def test_empty_report_has_no_accuracy():
    report = aggregate([], [], [], run_label="empty")
    assert report.overall.accuracy is None
    assert isinstance(report, EvalReport)
    assert format_report_table(report).startswith("Run: empty")
