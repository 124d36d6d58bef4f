"""Accuracy aggregation, metric slicing, overlap analysis and report output.

Accuracies are percentages (100 * correct / total). Internal values stay
unrounded; display rounding is half-up at two decimals so printed numbers
never depend on binary float rounding direction.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Mapping, Sequence

from ..core.types import AnswerRecord, Judgment, QueryTask, ToolKind

SLICE_DIMENSIONS = ("difficulty", "hop_class", "hops", "seeking", "domain",
                    "category", "dynamism")


class DisjointTaskSets(ValueError):
    """Raised when two runs being compared cover different task ids."""


def display_round(value: float, places: int = 2) -> float:
    """Half-up decimal rounding for display (0.005 -> 0.01, not banker's)."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class SliceStat:
    correct: int
    total: int

    @property
    def accuracy(self) -> float | None:
        """Percentage, unrounded; None when the bucket is empty."""
        if self.total == 0:
            return None
        return 100.0 * self.correct / self.total

    def display(self) -> str:
        acc = self.accuracy
        return "n/a" if acc is None else f"{display_round(acc):.2f}"

    def to_dict(self) -> dict[str, Any]:
        acc = self.accuracy
        return {"correct": self.correct, "total": self.total,
                "accuracy": acc, "accuracy_2dp": None if acc is None else display_round(acc)}


@dataclass
class EvalReport:
    run_label: str
    overall: SliceStat
    slices: dict[str, dict[str, SliceStat]]
    mean_tool_usage: float
    gain_vs_baseline: float | None = None
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def overall_accuracy(self) -> float | None:
        return self.overall.accuracy

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_label": self.run_label,
            "overall": self.overall.to_dict(),
            "mean_tool_usage": self.mean_tool_usage,
            "mean_tool_usage_2dp": display_round(self.mean_tool_usage),
            "gain_vs_baseline": self.gain_vs_baseline,
            "gain_vs_baseline_2dp": (None if self.gain_vs_baseline is None
                                     else display_round(self.gain_vs_baseline)),
            "slices": {dim: {bucket: stat.to_dict() for bucket, stat in buckets.items()}
                       for dim, buckets in self.slices.items()},
            "config": self.config,
        }


def seeking_bucket(record: AnswerRecord | None) -> str:
    """Which search modalities the record actually used: None/Image/Text/Both."""
    if record is None:
        return "None"
    kinds = {c.kind for c in record.search_calls()}
    has_image = ToolKind.IMAGE_SEARCH in kinds
    has_text = ToolKind.TEXT_SEARCH in kinds
    if has_image and has_text:
        return "Both"
    if has_image:
        return "Image"
    if has_text:
        return "Text"
    return "None"


def _bucket_of(dimension: str, task: QueryTask, record: AnswerRecord | None) -> str:
    if dimension == "difficulty":
        return task.difficulty.value
    if dimension == "hop_class":
        return "1-hop" if task.hops == 1 else "multi-hop"
    if dimension == "hops":
        return str(task.hops)
    if dimension == "seeking":
        return seeking_bucket(record)
    if dimension == "domain":
        return task.domain_label
    if dimension == "category":
        return task.category.value
    if dimension == "dynamism":
        return task.dynamism.value
    raise ValueError(f"unknown slice dimension: {dimension}")


def mean_tool_usage(records: Sequence[AnswerRecord]) -> float:
    """Average number of search calls (image + text) per record."""
    if not records:
        return 0.0
    return sum(len(r.search_calls()) for r in records) / len(records)


def aggregate(tasks: Sequence[QueryTask], records: Sequence[AnswerRecord],
              judgments: Sequence[Judgment], run_label: str = "run",
              baseline_accuracy: float | None = None,
              config: Mapping[str, Any] | None = None) -> EvalReport:
    """Fold judgments into an overall accuracy and the six slice dimensions."""
    task_by_id = {t.task_id: t for t in tasks}
    record_by_id = {r.task_id: r for r in records}

    counts: dict[str, dict[str, list[int]]] = {dim: {} for dim in SLICE_DIMENSIONS}
    correct_total = 0
    judged = 0
    for judgment in judgments:
        task = task_by_id.get(judgment.task_id)
        if task is None:
            continue
        judged += 1
        correct = 1 if judgment.accuracy else 0
        correct_total += correct
        record = record_by_id.get(judgment.task_id)
        for dim in SLICE_DIMENSIONS:
            bucket = _bucket_of(dim, task, record)
            cell = counts[dim].setdefault(bucket, [0, 0])
            cell[0] += correct
            cell[1] += 1

    slices = {
        dim: {bucket: SliceStat(correct=c, total=t)
              for bucket, (c, t) in sorted(buckets.items())}
        for dim, buckets in counts.items()
    }
    overall = SliceStat(correct=correct_total, total=judged)
    gain = None
    if baseline_accuracy is not None and overall.accuracy is not None:
        gain = overall.accuracy - baseline_accuracy
    return EvalReport(
        run_label=run_label,
        overall=overall,
        slices=slices,
        mean_tool_usage=mean_tool_usage(records),
        gain_vs_baseline=gain,
        config=dict(config) if config else {},
    )


# -- run overlap ------------------------------------------------------------------

def overlap(a: Sequence[Judgment], b: Sequence[Judgment]) -> float:
    """Jaccard overlap (as a percentage) of the two runs' correct task sets.

    Both runs must cover the same task ids. Two runs with identical judgment
    vectors score exactly 100.0, including the all-wrong case.
    """
    ids_a = {j.task_id for j in a}
    ids_b = {j.task_id for j in b}
    if ids_a != ids_b:
        raise DisjointTaskSets(
            f"runs cover different tasks ({len(ids_a ^ ids_b)} ids differ)")
    correct_a = {j.task_id for j in a if j.accuracy}
    correct_b = {j.task_id for j in b if j.accuracy}
    union = correct_a | correct_b
    if not union:
        return 100.0
    return 100.0 * len(correct_a & correct_b) / len(union)


def overlap_matrix(runs: Mapping[str, Sequence[Judgment]]) -> dict[str, dict[str, float]]:
    if len(runs) < 2:
        raise ValueError("overlap matrix needs at least two runs")
    labels = list(runs)
    return {
        row: {col: overlap(runs[row], runs[col]) for col in labels}
        for row in labels
    }


# -- formatting -----------------------------------------------------------------------

def format_report_table(report: EvalReport) -> str:
    """Aligned plain-text rendering of a report."""
    lines: list[str] = []
    lines.append(f"Run: {report.run_label}")
    lines.append(f"Overall accuracy: {report.overall.display()} "
                 f"({report.overall.correct}/{report.overall.total})")
    lines.append(f"Mean tool usage:  {display_round(report.mean_tool_usage):.2f}")
    if report.gain_vs_baseline is not None:
        lines.append(f"Gain vs baseline: {display_round(report.gain_vs_baseline):+.2f}")
    for dim, buckets in report.slices.items():
        lines.append("")
        lines.append(f"[{dim}]")
        if not buckets:
            lines.append("  n/a")
            continue
        width = max(len(b) for b in buckets)
        for bucket, stat in buckets.items():
            lines.append(f"  {bucket.ljust(width)}  {stat.display():>7}  "
                         f"({stat.correct}/{stat.total})")
    return "\n".join(lines) + "\n"


def format_report_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["dimension", "bucket", "correct", "total", "accuracy"])
    writer.writerow(["overall", "overall", report.overall.correct,
                     report.overall.total, report.overall.display()])
    for dim, buckets in report.slices.items():
        for bucket, stat in buckets.items():
            writer.writerow([dim, bucket, stat.correct, stat.total, stat.display()])
    return buf.getvalue()


__all__ = [
    "DisjointTaskSets",
    "EvalReport",
    "SLICE_DIMENSIONS",
    "SliceStat",
    "aggregate",
    "display_round",
    "format_report_csv",
    "format_report_table",
    "mean_tool_usage",
    "overlap",
    "overlap_matrix",
    "seeking_bucket",
]
