from __future__ import annotations

import pytest

from corpus import DEFAULT_CHAT_REPLY
from duallens.answerer import prepare_image
from duallens.backends.base import ImagePart, TextPart
from duallens.backends.mock import normalize_query
from duallens.cache import TwoLayerCache
from duallens.core.config import PipelineConfig
from duallens.core.types import (
    AnswerMode,
    QueryTask,
    SearchHit,
    ToolKind,
    validate_record,
)
from duallens.evalharness.baselines import (
    BaselineKind,
    _snippet_pieces,
    answer_baseline_task,
    build_baseline_request,
    run_baseline,
)
from duallens.media import save_png
from duallens.trace import TraceRecorder
from helpers import make_img, mini_backends

CFG = PipelineConfig()


def _task(corpus, task_id: str) -> QueryTask:
    return next(t for t in corpus.tasks if t.task_id == task_id)


def test_request_numbers_context_pieces():
    req = build_baseline_request(make_img(3), "What is it?",
                                 ["first piece", "second piece"], CFG)
    assert req.temperature == CFG.temperature
    assert req.max_tokens == CFG.max_tokens
    assert req.messages[0].role == "system"
    user = req.messages[1]
    assert isinstance(user.parts[0], ImagePart)
    assert isinstance(user.parts[1], TextPart)
    text = user.parts[1].text
    assert "[1] first piece" in text
    assert "[2] second piece" in text
    assert "What is it?" in text


def test_request_without_context_says_so():
    req = build_baseline_request(make_img(3), "Q?", [], CFG)
    text = req.messages[1].parts[1].text
    assert "(no context)" in text
    assert "[1]" not in text


def test_multimodal_baseline_uses_both_search_branches(corpus, mock_backends):
    backends = mock_backends()
    task = _task(corpus, "t01")
    record = answer_baseline_task(BaselineKind.MULTIMODAL_RAG, task, CFG,
                                  backends, TwoLayerCache(),
                                  image_root=corpus.image_root)
    # Corpus hits carry no snippet, so every hit is fetched and truncated.
    assert [c.kind for c in record.tool_calls] == [
        ToolKind.TEXT_SEARCH, ToolKind.PAGE_FETCH, ToolKind.PAGE_PARSE,
        ToolKind.IMAGE_SEARCH, ToolKind.PAGE_FETCH, ToolKind.PAGE_PARSE,
        ToolKind.RAG_ANSWER,
    ]
    assert record.fetched_urls == ("https://wiki.example/soup-cans-artwork",
                                   "https://wiki.example/campbell-soup")
    assert record.mode is AnswerMode.RETRIEVED
    assert record.predicted_domain == "Other"
    assert record.notes == ("context_pieces:2",)
    assert record.selected_chunks == ()
    assert record.plan is None
    # No fixture is registered for the baseline prompt digest, so the mock
    # chat serves its default reply, which baselines keep verbatim.
    assert record.answer == DEFAULT_CHAT_REPLY
    assert record.reasoning == ""
    assert validate_record(record) == []

    image = prepare_image(task, CFG, corpus.image_root)
    assert record.tool_calls[0].input_digest == normalize_query(task.question)
    assert record.tool_calls[3].input_digest == f"img:{image.hash16}"


@pytest.mark.parametrize("kind,search_kind", [
    (BaselineKind.TEXT_RAG, ToolKind.TEXT_SEARCH),
    (BaselineKind.IMAGE_RAG, ToolKind.IMAGE_SEARCH),
])
def test_single_branch_baseline_survives_empty_results(corpus, mock_backends,
                                                       kind, search_kind):
    # t02 has no search fixtures at all: both branches come back empty.
    record = answer_baseline_task(kind, _task(corpus, "t02"), CFG,
                                  mock_backends(), TwoLayerCache(),
                                  image_root=corpus.image_root)
    assert [c.kind for c in record.tool_calls] == [search_kind, ToolKind.RAG_ANSWER]
    assert record.fetched_urls == ()
    assert record.notes == ("context_pieces:0",)
    assert record.mode is AnswerMode.RETRIEVED
    assert validate_record(record) == []


def _toy_task(task_id: str, question: str) -> QueryTask:
    return QueryTask.from_dict({
        "task_id": task_id, "image": "img.png", "question": question,
        "gold_answer": "x", "difficulty": "Easy", "hops": 1,
        "category": "FactualKnowledge", "domain_label": "Other",
        "dynamism": "Static", "glasses": "Rokid", "search_log": [],
    })


def test_snippets_skip_page_fetching(tmp_path):
    q = "what powers the beacon?"
    table = {"text": {normalize_query(q): [
        {"url": "https://a.example/", "title": "Beacon", "snippet": "A fusion core."},
        {"url": "https://b.example/", "snippet": "Bare snippet."},
    ]}}
    backends = mini_backends(chat_table={"__default__": "  The core.  "},
                             search_table=table)
    save_png(make_img(9), tmp_path / "img.png")
    record = answer_baseline_task(BaselineKind.TEXT_RAG, _toy_task("s1", q), CFG,
                                  backends, TwoLayerCache(), image_root=tmp_path)
    assert [c.kind for c in record.tool_calls] == [ToolKind.TEXT_SEARCH,
                                                   ToolKind.RAG_ANSWER]
    assert backends.call_log.count("fetch_page") == 0
    assert record.notes == ("context_pieces:2",)
    assert record.answer == "The core."


def test_titled_snippet_formatting():
    hits = [SearchHit(url="https://x.example/", title="Title", snippet="Snip",
                      position=1),
            SearchHit(url="https://y.example/", title="", snippet="Loose",
                      position=2)]
    urls: list[str] = []
    pieces = _snippet_pieces(hits, CFG, mini_backends(), TwoLayerCache(),
                             TraceRecorder(), urls)
    assert pieces == ["Title: Snip", "Loose"]
    assert urls == ["https://x.example/", "https://y.example/"]


def test_fetch_failures_drop_the_piece_but_not_the_run(tmp_path):
    q = "who made it?"
    table = {"text": {normalize_query(q): [{"url": "https://gone.example/x"}]}}
    backends = mini_backends(chat_table={"__default__": "No idea."},
                             search_table=table, pages={})
    save_png(make_img(11), tmp_path / "img.png")
    record = answer_baseline_task(BaselineKind.TEXT_RAG, _toy_task("s2", q), CFG,
                                  backends, TwoLayerCache(), image_root=tmp_path)
    kinds = [c.kind for c in record.tool_calls]
    assert ToolKind.PAGE_FETCH in kinds
    assert ToolKind.PAGE_PARSE not in kinds
    assert any(n.startswith("page_error:https://gone.example/x:") for n in record.notes)
    assert "context_pieces:0" in record.notes
    assert record.answer == "No idea."


def test_run_baseline_maps_task_failures_to_error_records(corpus, mock_backends):
    good = _task(corpus, "t02")
    broken = QueryTask.from_dict({**good.to_dict(),
                                  "task_id": "t99", "image": "images/absent.png"})
    records = run_baseline(BaselineKind.TEXT_RAG, [good, broken], CFG,
                           mock_backends(), TwoLayerCache(),
                           image_root=corpus.image_root)
    assert [r.task_id for r in records] == ["t02", "t99"]
    assert records[0].error is None
    assert records[1].error is not None
    assert records[1].error.startswith("FileNotFoundError")
    assert records[1].notes == ("task_failed",)


def test_run_baseline_parallel_keeps_task_order(corpus, mock_backends):
    tasks = [t for t in corpus.tasks if t.task_id in ("t01", "t02", "t03")]
    records = run_baseline(BaselineKind.MULTIMODAL_RAG, tasks, CFG,
                           mock_backends(), TwoLayerCache(),
                           image_root=corpus.image_root, jobs=3)
    assert [r.task_id for r in records] == ["t01", "t02", "t03"]
    assert all(r.error is None for r in records)
