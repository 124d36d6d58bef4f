"""Dataset loading with per-line validation, plus corpus statistics."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from ..core.jsonio import read_jsonl
from ..core.types import QueryTask, ValidationError


@dataclass
class DatasetLoadResult:
    tasks: list[QueryTask]
    rejections: list[tuple[int, str]]  # (line number, reason)
    image_root: str = ""

    @property
    def ok(self) -> bool:
        return not self.rejections


def load_dataset(path: str | Path) -> DatasetLoadResult:
    """Parse a JSONL dataset; invalid lines are reported, not fatal.

    Relative image paths are interpreted against the dataset file's directory,
    exposed as `image_root`.
    """
    path = Path(path)
    tasks: list[QueryTask] = []
    rejections: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                rejections.append((line_no, f"invalid JSON: {exc.msg}"))
                continue
            try:
                task = QueryTask.from_dict(row)
            except (ValidationError, KeyError, TypeError, ValueError) as exc:
                rejections.append((line_no, f"{type(exc).__name__}: {exc}"))
                continue
            if task.task_id in seen_ids:
                rejections.append((line_no, f"duplicate task_id {task.task_id}"))
                continue
            seen_ids.add(task.task_id)
            tasks.append(task)
    return DatasetLoadResult(tasks=tasks, rejections=rejections,
                             image_root=str(path.parent))


@dataclass
class DatasetStats:
    total: int
    single_hop: int
    multi_hop: int
    mean_hops: float
    mean_question_words: float
    mean_answer_words: float
    tool_calls_total: int
    tool_calls_avg: float
    by_glasses: dict[str, int] = field(default_factory=dict)
    by_domain: dict[str, int] = field(default_factory=dict)
    by_category: dict[str, int] = field(default_factory=dict)
    by_difficulty: dict[str, int] = field(default_factory=dict)
    by_dynamism: dict[str, int] = field(default_factory=dict)
    question_prefix_1: dict[str, int] = field(default_factory=dict)
    question_prefix_2: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "single_hop": self.single_hop,
            "multi_hop": self.multi_hop,
            "mean_hops": self.mean_hops,
            "mean_question_words": self.mean_question_words,
            "mean_answer_words": self.mean_answer_words,
            "tool_calls_total": self.tool_calls_total,
            "tool_calls_avg": self.tool_calls_avg,
            "by_glasses": self.by_glasses,
            "by_domain": self.by_domain,
            "by_category": self.by_category,
            "by_difficulty": self.by_difficulty,
            "by_dynamism": self.by_dynamism,
            "question_prefix_1": self.question_prefix_1,
            "question_prefix_2": self.question_prefix_2,
        }


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _sorted_counter(counter: Counter) -> dict[str, int]:
    # Highest count first, alphabetical within ties, for stable output.
    return dict(sorted(counter.items(), key=lambda kv: (-kv[1], kv[0])))


def dataset_stats(tasks: Sequence[QueryTask]) -> DatasetStats:
    glasses = Counter(t.glasses for t in tasks)
    domain = Counter(t.domain_label for t in tasks)
    category = Counter(t.category.value for t in tasks)
    difficulty = Counter(t.difficulty.value for t in tasks)
    dynamism = Counter(t.dynamism.value for t in tasks)
    prefix_1: Counter = Counter()
    prefix_2: Counter = Counter()
    for t in tasks:
        words = t.question.split()
        if words:
            prefix_1[words[0].lower()] += 1
        if len(words) >= 2:
            prefix_2[f"{words[0].lower()} {words[1].lower()}"] += 1
    answer_lengths = [len(t.gold_answer.split()) for t in tasks if t.gold_answer]
    tool_total = sum(len(t.search_log) for t in tasks)
    return DatasetStats(
        total=len(tasks),
        single_hop=sum(1 for t in tasks if t.hops == 1),
        multi_hop=sum(1 for t in tasks if t.hops >= 2),
        mean_hops=_mean([t.hops for t in tasks]),
        mean_question_words=_mean([len(t.question.split()) for t in tasks]),
        mean_answer_words=_mean(answer_lengths),
        tool_calls_total=tool_total,
        tool_calls_avg=tool_total / len(tasks) if tasks else 0.0,
        by_glasses=_sorted_counter(glasses),
        by_domain=_sorted_counter(domain),
        by_category=_sorted_counter(category),
        by_difficulty=_sorted_counter(difficulty),
        by_dynamism=_sorted_counter(dynamism),
        question_prefix_1=_sorted_counter(prefix_1),
        question_prefix_2=_sorted_counter(prefix_2),
    )


__all__ = ["DatasetLoadResult", "DatasetStats", "dataset_stats", "load_dataset"]
