"""Evaluation harness: dataset, judge, metrics, baselines, ablations, errors."""

from .ablation import (
    ABLATION_SETTINGS,
    FULL_SYSTEM,
    OPERATION_TO_KIND,
    AblationResult,
    format_ablation_table,
    run_ablations,
    signature_of,
)
from .baselines import BaselineKind, answer_baseline_task, build_baseline_request, run_baseline
from .dataset import DatasetLoadResult, DatasetStats, dataset_stats, load_dataset
from .errorclass import (
    ERROR_LABELS,
    ErrorClassification,
    MissingAnnotation,
    classify_error,
    error_breakdown,
)
from .judge import (
    build_judge_request,
    judge_records,
    judge_with_chat,
    match_judge,
    parse_judge_reply,
)
from .metrics import (
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

__all__ = [name for name in dir() if not name.startswith("_")]
