"""Answer judging: LLM-as-judge with a fail-closed parse contract, plus a
lexical fallback judge for fully offline runs."""

from __future__ import annotations

import re
from typing import Sequence

from ..backends.base import BackendError, ChatBackend, ChatRequest, text_message
from ..core.jsonio import extract_first_json_object
from ..core.types import AnswerRecord, Judgment, QueryTask
from ..prompts import PromptLibrary, default_library


def build_judge_request(question: str, gold: str, prediction: str,
                        temperature: float = 0.0, max_tokens: int = 256,
                        prompts: PromptLibrary | None = None) -> ChatRequest:
    lib = prompts or default_library()
    return ChatRequest(
        messages=(
            text_message("system", lib.get("judge_system")),
            text_message("user", lib.render("judge_user", query=question,
                                            answer=gold, prediction=prediction)),
        ),
        temperature=temperature,
        max_tokens=max_tokens,
    )


def parse_judge_reply(reply: str) -> bool:
    """Extract the verdict from a judge reply.

    Contract: the first balanced JSON object must carry an "accuracy" field
    holding true/false (a "true"/"false" string is tolerated). Anything else
    raises ValueError.
    """
    data = extract_first_json_object(reply)
    if "accuracy" not in data:
        raise ValueError('judge reply JSON lacks an "accuracy" field')
    value = data["accuracy"]
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "false"):
        return value.strip().lower() == "true"
    raise ValueError(f'judge "accuracy" value is not a boolean: {value!r}')


def judge_with_chat(chat: ChatBackend, task_id: str, question: str, gold: str,
                    prediction: str, temperature: float = 0.0,
                    prompts: PromptLibrary | None = None) -> Judgment:
    """One judged verdict; one retry on a malformed reply, then fail closed."""
    request = build_judge_request(question, gold, prediction,
                                  temperature=temperature, prompts=prompts)
    reply = ""
    for attempt in range(2):
        try:
            reply = chat.chat(request, purpose="Judge")
            return Judgment(task_id=task_id, accuracy=parse_judge_reply(reply),
                            judge_raw=reply)
        except ValueError:
            continue
        except BackendError as exc:
            return Judgment(task_id=task_id, accuracy=False,
                            judge_raw=f"{type(exc).__name__}: {exc}",
                            flags=("judge_backend_error",))
    return Judgment(task_id=task_id, accuracy=False, judge_raw=reply,
                    flags=("judge_parse_failure",))


def _normalize(text: str) -> str:
    return " ".join(re.findall(r"[a-z0-9']+", text.lower()))


def match_judge(gold: str, prediction: str) -> bool:
    """Offline verdict: the normalized gold answer must appear in the prediction."""
    g = _normalize(gold)
    p = _normalize(prediction)
    if not g:
        return False
    return f" {g} " in f" {p} "


def judge_records(tasks: Sequence[QueryTask], records: Sequence[AnswerRecord],
                  mode: str = "match", chat: ChatBackend | None = None,
                  temperature: float = 0.0,
                  prompts: PromptLibrary | None = None) -> list[Judgment]:
    """Judge each record against its task's gold answer.

    mode "match" uses the lexical judge; mode "llm" needs a chat backend.
    Records without a task or without a gold answer fail closed.
    """
    if mode not in ("match", "llm"):
        raise ValueError(f"unknown judge mode: {mode}")
    if mode == "llm" and chat is None:
        raise ValueError("llm judging needs a chat backend")
    by_id = {t.task_id: t for t in tasks}
    judgments: list[Judgment] = []
    for record in records:
        task = by_id.get(record.task_id)
        if task is None:
            judgments.append(Judgment(task_id=record.task_id, accuracy=False,
                                      flags=("unknown_task",)))
            continue
        if not task.gold_answer:
            judgments.append(Judgment(task_id=record.task_id, accuracy=False,
                                      flags=("missing_gold",)))
            continue
        if mode == "match":
            verdict = match_judge(task.gold_answer, record.answer)
            judgments.append(Judgment(task_id=record.task_id, accuracy=verdict,
                                      judge_raw="match"))
        else:
            judgments.append(judge_with_chat(chat, record.task_id, task.question,
                                             task.gold_answer, record.answer,
                                             temperature=temperature, prompts=prompts))
    return judgments


__all__ = [
    "build_judge_request",
    "judge_records",
    "judge_with_chat",
    "match_judge",
    "parse_judge_reply",
]
