from __future__ import annotations

import pytest

from duallens.backends.base import BackendUnavailable, CallLog, ChatBackend
from duallens.evalharness.judge import (
    build_judge_request,
    judge_records,
    judge_with_chat,
    match_judge,
    parse_judge_reply,
)
from helpers import ScriptedChat


def test_build_judge_request_shape():
    req = build_judge_request("Where is it?", "Paris", "In Paris.")
    assert req.temperature == 0.0
    assert req.max_tokens == 256
    assert len(req.messages) == 2
    assert req.messages[0].role == "system"
    user_text = req.messages[1].parts[0].text
    assert user_text.endswith(
        "Question: Where is it?, Ground Truth: Paris, Prediction: In Paris.")
    # The judge never sees the image.
    assert all(len(m.parts) == 1 for m in req.messages)


@pytest.mark.parametrize("reply, verdict", [
    ('{"accuracy": true}', True),
    ('{"accuracy": false}', False),
    ('The answer matches. {"accuracy": true} Done.', True),
    ('```json\n{"accuracy": false}\n```', False),
    ('{"accuracy": "true"}', True),
    ('{"accuracy": "False"}', False),
    ('{"accuracy": true, "note": "keep {braces} intact"}', True),
    ('{"accuracy": false} {"accuracy": true}', False),
])
def test_parse_judge_reply_contract(reply, verdict):
    assert parse_judge_reply(reply) is verdict


@pytest.mark.parametrize("reply", [
    "",
    "plain prose verdict: correct",
    '{"verdict": true}',
    '{"accuracy": 1}',
    '{"accuracy": "yes"}',
    '[true]',
    '{"wrapper": 1} no accuracy anywhere',
])
def test_parse_judge_reply_rejections(reply):
    with pytest.raises(ValueError):
        parse_judge_reply(reply)


def test_judge_with_chat_retries_once_then_fails_closed():
    flaky = ScriptedChat(["garbage reply", '{"accuracy": true}'])
    j = judge_with_chat(flaky, "t1", "q?", "gold", "pred")
    assert j.accuracy is True and j.flags == ()
    assert flaky.calls == 2

    hopeless = ScriptedChat(["nope", "still nope"])
    j = judge_with_chat(hopeless, "t1", "q?", "gold", "pred")
    assert j.accuracy is False
    assert j.flags == ("judge_parse_failure",)
    assert j.judge_raw == "still nope"
    assert hopeless.calls == 2


def test_judge_with_chat_backend_error_fails_closed():
    class Down(ChatBackend):
        def chat(self, request, purpose="Chat"):
            raise BackendUnavailable("judge endpoint offline")

    j = judge_with_chat(Down(), "t1", "q?", "gold", "pred")
    assert j.accuracy is False
    assert j.flags == ("judge_backend_error",)
    assert j.judge_raw == "BackendUnavailable: judge endpoint offline"


@pytest.mark.parametrize("gold, prediction, verdict", [
    ("Paris", "The tower is in Paris.", True),
    ("paris", "PARIS!", True),
    ("$499", "It costs $499 right now.", True),
    ("Andy Warhol", "andy  warhol painted it", True),
    ("cat", "concatenate", False),
    ("Osaka", "Tokyo", False),
    ("", "anything", False),
    ("7am to 3pm", "Open 7am to 3pm daily.", True),
])
def test_match_judge_token_containment(gold, prediction, verdict):
    assert match_judge(gold, prediction) is verdict


def test_judge_records_lexical_mode(corpus, full_run):
    records, judgments = full_run
    assert len(judgments) == len(records) == 20
    verdicts = {j.task_id: j.accuracy for j in judgments}
    wrong = {tid for tid, ok in verdicts.items() if not ok}
    assert wrong == {"t10", "t11", "t12", "t13"}
    assert all(j.judge_raw == "match" for j in judgments)


def test_judge_records_fallback_flags(corpus):
    from duallens.core.types import AnswerMode, AnswerRecord, ToolCall, ToolKind

    def rec(task_id, answer="x"):
        return AnswerRecord(task_id=task_id, answer=answer, reasoning="",
                            mode=AnswerMode.DIRECT, predicted_domain="Other",
                            tool_calls=(ToolCall(kind=ToolKind.DIRECT_ANSWER,
                                                 input_digest="d"),))

    task = corpus.tasks[0]
    goldless = type(task).from_dict({**task.to_dict(), "gold_answer": None})
    judgments = judge_records([goldless], [rec(task.task_id), rec("phantom")])
    assert judgments[0].flags == ("missing_gold",)
    assert judgments[1].flags == ("unknown_task",)
    assert not judgments[0].accuracy and not judgments[1].accuracy


def test_judge_records_mode_validation(corpus):
    with pytest.raises(ValueError, match="unknown judge mode"):
        judge_records(corpus.tasks, [], mode="vibes")
    with pytest.raises(ValueError, match="needs a chat backend"):
        judge_records(corpus.tasks, [], mode="llm")


def test_judge_records_llm_mode_uses_chat(corpus, full_run):
    records, _ = full_run
    sample = [r for r in records if r.task_id in ("t01", "t02")]
    chat = ScriptedChat(['{"accuracy": true}'])
    judgments = judge_records(corpus.tasks, sample, mode="llm", chat=chat)
    assert [j.accuracy for j in judgments] == [True, True]
    assert chat.calls == 2
