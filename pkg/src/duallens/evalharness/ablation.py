"""Component ablations.

Twelve pipeline settings: the full system plus eleven reduced configurations
covering retrieval gating (none / mandatory / demand-adaptive), branch subsets
(image only / text only / both) and the two optional tools (object detector,
query decoupler). Every setting runs with a fresh cache and a fresh call log
so its backend-operation signature is observable in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from ..backends.base import Backends
from ..cache import TwoLayerCache
from ..core.config import PipelineConfig, with_overrides
from ..core.types import AnswerRecord, Branch, Judgment, QueryTask, RetrievalMode
from ..prompts import PromptLibrary
from ..answerer import run_tasks
from .judge import judge_records
from .metrics import EvalReport, aggregate

FULL_SYSTEM = "Full System"

_BOTH = (Branch.VISUAL, Branch.TEXTUAL)
_V = (Branch.VISUAL,)
_T = (Branch.TEXTUAL,)


def _setting(mode: RetrievalMode, branches: tuple[Branch, ...],
             detector: bool, decoupler: bool) -> dict[str, Any]:
    return {
        "retrieval_mode": mode,
        "branches": branches,
        "use_object_detector": detector,
        "use_query_decoupler": decoupler,
    }


# Ordered: the gating ablation, the mandatory-search block, then the
# demand-adaptive block. Names spell out exactly what is enabled.
ABLATION_SETTINGS: tuple[tuple[str, dict[str, Any]], ...] = (
    ("w/o Search",
     _setting(RetrievalMode.NONE, _BOTH, False, False)),
    ("Mandatory: Image Only (w/o Object Detector)",
     _setting(RetrievalMode.MANDATORY, _V, False, False)),
    ("Mandatory: Text Only (w/o Query Decoupler)",
     _setting(RetrievalMode.MANDATORY, _T, False, False)),
    ("Mandatory: Image + Text (w Object Detector + w Query Decoupler)",
     _setting(RetrievalMode.MANDATORY, _BOTH, True, True)),
    ("Mandatory: Image + Text (w/o Object Detector + w/o Query Decoupler)",
     _setting(RetrievalMode.MANDATORY, _BOTH, False, False)),
    ("Demand-Adaptive: Image Only (w Object Detector)",
     _setting(RetrievalMode.DEMAND_ADAPTIVE, _V, True, False)),
    ("Demand-Adaptive: Image Only (w/o Object Detector)",
     _setting(RetrievalMode.DEMAND_ADAPTIVE, _V, False, False)),
    ("Demand-Adaptive: Text Only (w Query Decoupler)",
     _setting(RetrievalMode.DEMAND_ADAPTIVE, _T, False, True)),
    ("Demand-Adaptive: Text Only (w/o Query Decoupler)",
     _setting(RetrievalMode.DEMAND_ADAPTIVE, _T, False, False)),
    ("Demand-Adaptive: Image + Text (w Object Detector + w/o Query Decoupler)",
     _setting(RetrievalMode.DEMAND_ADAPTIVE, _BOTH, True, False)),
    ("Demand-Adaptive: Image + Text (w/o Object Detector + w Query Decoupler)",
     _setting(RetrievalMode.DEMAND_ADAPTIVE, _BOTH, False, True)),
)

FULL_OVERRIDES = _setting(RetrievalMode.DEMAND_ADAPTIVE, _BOTH, True, True)

# Backend call-log operations -> trace kind names, for signature analysis.
OPERATION_TO_KIND: dict[str, str] = {
    "chat:DomainRoute": "DomainRoute",
    "chat:DirectAnswer": "DirectAnswer",
    "chat:SearchRoute": "SearchRoute",
    "chat:QueryDecouple": "QueryDecouple",
    "chat:RagAnswer": "RagAnswer",
    "chat:Judge": "Judge",
    "detect": "ObjectDetect",
    "image_search": "ImageSearch",
    "text_search": "TextSearch",
    "fetch_page": "PageFetch",
    "parse_page": "PageParse",
    "rerank_text": "Rerank",
    "rerank_image": "Rerank",
}


def signature_of(backends: Backends) -> frozenset[str]:
    """The set of trace kinds this backend set has served so far."""
    kinds = set()
    for op in backends.call_log.operations():
        kind = OPERATION_TO_KIND.get(op)
        if kind is not None:
            kinds.add(kind)
    return frozenset(kinds)


@dataclass
class AblationResult:
    name: str
    config: PipelineConfig
    records: list[AnswerRecord]
    judgments: list[Judgment]
    report: EvalReport
    signature: frozenset[str]


def run_ablations(tasks: Sequence[QueryTask], base_cfg: PipelineConfig,
                  make_backends: Callable[[], Backends],
                  prompts: PromptLibrary | None = None,
                  image_root: str | Path | None = None,
                  judge_mode: str = "match",
                  include_full: bool = True,
                  jobs: int = 1) -> dict[str, AblationResult]:
    """Run every ablation setting over the same tasks.

    Each setting gets fresh backends (fresh call log) and a fresh cache.
    Reports carry gain_vs_baseline relative to the full system, so ablation
    rows show their decline as a negative gain.
    """
    settings: list[tuple[str, dict[str, Any]]] = []
    if include_full:
        settings.append((FULL_SYSTEM, FULL_OVERRIDES))
    settings.extend(ABLATION_SETTINGS)

    results: dict[str, AblationResult] = {}
    full_accuracy: float | None = None
    for name, overrides in settings:
        cfg = with_overrides(base_cfg, **overrides)
        backends = make_backends()
        cache = TwoLayerCache()
        records = run_tasks(tasks, cfg, backends, cache, prompts, image_root, jobs=jobs)
        judgments = judge_records(tasks, records, mode=judge_mode, chat=backends.chat)
        report = aggregate(tasks, records, judgments, run_label=name,
                           baseline_accuracy=full_accuracy, config=cfg.to_dict())
        if name == FULL_SYSTEM and report.overall.accuracy is not None:
            full_accuracy = report.overall.accuracy
        results[name] = AblationResult(
            name=name, config=cfg, records=records, judgments=judgments,
            report=report, signature=signature_of(backends))
    return results


def format_ablation_table(results: Mapping[str, AblationResult]) -> str:
    from .metrics import display_round

    width = max(len(name) for name in results)
    lines = [f"{'Setting'.ljust(width)}  {'Acc':>7}  {'Delta':>7}"]
    for name, result in results.items():
        acc = result.report.overall.accuracy
        acc_text = "n/a" if acc is None else f"{display_round(acc):.2f}"
        gain = result.report.gain_vs_baseline
        gain_text = "" if gain is None else f"{display_round(gain):+.2f}"
        lines.append(f"{name.ljust(width)}  {acc_text:>7}  {gain_text:>7}")
    return "\n".join(lines) + "\n"


__all__ = [
    "ABLATION_SETTINGS",
    "AblationResult",
    "FULL_OVERRIDES",
    "FULL_SYSTEM",
    "OPERATION_TO_KIND",
    "format_ablation_table",
    "run_ablations",
    "signature_of",
]
