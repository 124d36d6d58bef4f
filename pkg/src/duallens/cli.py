"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .answerer import answer_task, run_tasks
from .backends.base import BackendError, Backends, CallLog
from .backends.live import load_live_backends
from .backends.mock import load_mock_backends
from .cache import TwoLayerCache
from .core.config import ConfigError, PipelineConfig, load_config, validate_config, \
    with_overrides
from .core.jsonio import load_judgments, load_records, save_judgments, save_records
from .core.types import (
    Branch,
    Category,
    Difficulty,
    Dynamism,
    QueryTask,
    RetrievalMode,
)
from .evalharness.ablation import format_ablation_table, run_ablations
from .evalharness.baselines import BaselineKind, run_baseline
from .evalharness.dataset import dataset_stats, load_dataset
from .evalharness.errorclass import error_breakdown
from .evalharness.judge import judge_records
from .evalharness.metrics import aggregate, format_report_csv, format_report_table, \
    overlap_matrix
from .media import load_image, resize_shortest_edge
from .prompts import PromptLibrary
from .retriever import route_search, run_retrieval
from .trace import TraceRecorder

CACHE_FILENAME = "duallens.cache"

_RETRIEVAL_FLAGS = {
    "none": RetrievalMode.NONE,
    "mandatory": RetrievalMode.MANDATORY,
    "adaptive": RetrievalMode.DEMAND_ADAPTIVE,
}

_BASELINE_FLAGS = {
    "text": BaselineKind.TEXT_RAG,
    "image": BaselineKind.IMAGE_RAG,
    "multimodal": BaselineKind.MULTIMODAL_RAG,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON pipeline config file")
    parser.add_argument("--mock-backends", metavar="DIR",
                        help="fixture directory; offline mock backends")
    parser.add_argument("--cache-dir", metavar="DIR",
                        help="directory holding the persistent cache file")
    parser.add_argument("--jobs", type=int, default=1, help="parallel tasks")


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--retrieval", choices=sorted(_RETRIEVAL_FLAGS),
                        help="retrieval gating mode")
    parser.add_argument("--branches",
                        help="comma list of retrieval branches: visual,textual")
    parser.add_argument("--no-detector", action="store_true",
                        help="disable the object detector")
    parser.add_argument("--no-decoupler", action="store_true",
                        help="disable the query decoupler")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duallens",
        description="Demand-adaptive multimodal RAG pipeline and evaluation harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ask", help="answer a single image-grounded question")
    _add_common(p)
    _add_pipeline_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--location")
    p.add_argument("--trace", action="store_true", help="print the full record JSON")

    p = sub.add_parser("run", help="answer every task in a dataset")
    _add_common(p)
    _add_pipeline_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output records JSONL")
    p.add_argument("--label", default="run")
    p.add_argument("--baseline", choices=sorted(_BASELINE_FLAGS),
                   help="run a heuristic RAG baseline instead of the pipeline")

    p = sub.add_parser("judge", help="judge run records against gold answers")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="output judgments JSONL")
    p.add_argument("--judge", choices=("match", "llm"), default="match")

    p = sub.add_parser("report", help="aggregate judgments into a metric report")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--judgments", required=True)
    p.add_argument("--out-prefix", required=True,
                   help="writes <prefix>.json, <prefix>.txt, <prefix>.csv")
    p.add_argument("--label", default="run")
    p.add_argument("--baseline-judgments",
                   help="judgments JSONL of a baseline run, for the gain column")
    p.add_argument("--errors", action="store_true",
                   help="include the failure-taxonomy breakdown")
    p.add_argument("--overlap", nargs="*", metavar="LABEL=JUDGMENTS",
                   help="extra runs for the pairwise overlap matrix")

    p = sub.add_parser("ablate", help="run the component ablation matrix")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", help="write per-setting reports here")

    p = sub.add_parser("stats", help="print dataset statistics")
    _add_common(p)
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("cache-stats", help="inspect a persistent cache file")
    _add_common(p)

    p = sub.add_parser("read-url", help="fetch and parse one page")
    _add_common(p)
    p.add_argument("--url", required=True)

    p = sub.add_parser("retrieve", help="run retrieval for one image + question")
    _add_common(p)
    _add_pipeline_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--dry-run", action="store_true",
                   help="plan, search and print the URL set without fetching pages")

    return parser


# -- shared plumbing -----------------------------------------------------------

def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    if getattr(args, "retrieval", None):
        overrides["retrieval_mode"] = _RETRIEVAL_FLAGS[args.retrieval]
    if getattr(args, "branches", None):
        names = [b.strip().lower() for b in args.branches.split(",") if b.strip()]
        branch_map = {"visual": Branch.VISUAL, "textual": Branch.TEXTUAL}
        unknown = [n for n in names if n not in branch_map]
        if unknown:
            raise ConfigError(f"unknown branches: {', '.join(unknown)}")
        overrides["branches"] = tuple(dict.fromkeys(branch_map[n] for n in names))
    if getattr(args, "no_detector", False):
        overrides["use_object_detector"] = False
    if getattr(args, "no_decoupler", False):
        overrides["use_query_decoupler"] = False
    if overrides:
        cfg = with_overrides(cfg, **overrides)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def _build_backends(args: argparse.Namespace, cfg: PipelineConfig) -> Backends:
    if args.mock_backends:
        return load_mock_backends(args.mock_backends,
                                  chat_retries=cfg.chat_retries,
                                  fetch_retries=cfg.fetch_retries)
    return load_live_backends()


def _open_cache(args: argparse.Namespace) -> tuple[TwoLayerCache, Path | None]:
    cache = TwoLayerCache()
    if not args.cache_dir:
        return cache, None
    cache_dir = Path(args.cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / CACHE_FILENAME
    if path.exists():
        cache.load(path)
    return cache, path


def _persist_cache(cache: TwoLayerCache, path: Path | None) -> None:
    if path is not None:
        cache.save(path)


def _adhoc_task(image: str, question: str, location: str | None) -> QueryTask:
    return QueryTask(
        task_id="adhoc", image=image, question=question, location=location,
        difficulty=Difficulty.MEDIUM, hops=1, category=Category.SIMPLE_RECOGNITION,
        domain_label="Other", dynamism=Dynamism.STATIC, glasses="cli")


def _load_dataset_or_fail(path: str) -> tuple[list[QueryTask], str]:
    result = load_dataset(path)
    for line_no, reason in result.rejections:
        print(f"warning: {path}:{line_no}: rejected ({reason})", file=sys.stderr)
    if not result.tasks:
        raise RuntimeError(f"no valid tasks in {path}")
    return result.tasks, result.image_root


# -- commands ---------------------------------------------------------------------

def cmd_ask(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    backends = _build_backends(args, cfg)
    cache, cache_path = _open_cache(args)
    task = _adhoc_task(args.image, args.question, args.location)
    record = answer_task(task, cfg, backends, cache)
    _persist_cache(cache, cache_path)
    if args.trace:
        print(json.dumps(record.to_dict(), indent=2, ensure_ascii=False))
    else:
        print(record.answer)
        print(f"[mode={record.mode.value} domain={record.predicted_domain}]",
              file=sys.stderr)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    tasks, image_root = _load_dataset_or_fail(args.dataset)
    backends = _build_backends(args, cfg)
    cache, cache_path = _open_cache(args)
    if args.baseline:
        kind = _BASELINE_FLAGS[args.baseline]
        records = run_baseline(kind, tasks, cfg, backends, cache,
                               image_root=image_root, jobs=args.jobs)
        label = f"{args.label}:{kind.value}"
    else:
        records = run_tasks(tasks, cfg, backends, cache,
                            image_root=image_root, jobs=args.jobs)
        label = args.label
    _persist_cache(cache, cache_path)
    save_records(records, args.out)
    meta = {
        "label": label,
        "dataset": str(args.dataset),
        "tasks": len(tasks),
        "records": len(records),
        "errors": sum(1 for r in records if r.error),
        "config": cfg.to_dict(),
    }
    Path(f"{args.out}.meta.json").write_text(
        json.dumps(meta, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_judge(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    tasks, _ = _load_dataset_or_fail(args.dataset)
    records = load_records(args.records)
    chat = None
    if args.judge == "llm":
        chat = _build_backends(args, cfg).chat
    judgments = judge_records(tasks, records, mode=args.judge, chat=chat,
                              temperature=cfg.temperature)
    save_judgments(judgments, args.out)
    correct = sum(1 for j in judgments if j.accuracy)
    print(f"judged {len(judgments)} records: {correct} correct")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    tasks, _ = _load_dataset_or_fail(args.dataset)
    records = load_records(args.records)
    judgments = load_judgments(args.judgments)
    baseline_accuracy = None
    if args.baseline_judgments:
        base = load_judgments(args.baseline_judgments)
        stat = aggregate(tasks, [], base, run_label="baseline").overall
        baseline_accuracy = stat.accuracy
    report = aggregate(tasks, records, judgments, run_label=args.label,
                       baseline_accuracy=baseline_accuracy)
    payload = report.to_dict()
    if args.errors:
        counts, _ = error_breakdown(tasks, records, judgments)
        payload["error_breakdown"] = counts
    if args.overlap:
        runs = {args.label: judgments}
        for spec in args.overlap:
            if "=" not in spec:
                raise ConfigError(f"--overlap wants LABEL=JUDGMENTS, got {spec}")
            label, path = spec.split("=", 1)
            runs[label] = load_judgments(path)
        payload["overlap_matrix"] = overlap_matrix(runs)
    prefix = args.out_prefix
    Path(f"{prefix}.json").write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    table = format_report_table(report)
    Path(f"{prefix}.txt").write_text(table, encoding="utf-8")
    Path(f"{prefix}.csv").write_text(format_report_csv(report), encoding="utf-8")
    print(table, end="")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    tasks, image_root = _load_dataset_or_fail(args.dataset)
    if not args.mock_backends:
        raise ConfigError("ablate requires --mock-backends (offline fixtures)")
    fixture_dir = args.mock_backends

    def make_backends() -> Backends:
        return load_mock_backends(fixture_dir, chat_retries=cfg.chat_retries,
                                  fetch_retries=cfg.fetch_retries)

    results = run_ablations(tasks, cfg, make_backends, image_root=image_root,
                            jobs=args.jobs)
    print(format_ablation_table(results), end="")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, result in results.items():
            slug = "".join(ch if ch.isalnum() else "-" for ch in name).strip("-").lower()
            payload = result.report.to_dict()
            payload["signature"] = sorted(result.signature)
            (out_dir / f"{slug}.json").write_text(
                json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
                encoding="utf-8")
        print(f"wrote {len(results)} reports to {args.out_dir}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    tasks, _ = _load_dataset_or_fail(args.dataset)
    stats = dataset_stats(tasks)
    print(json.dumps(stats.to_dict(), indent=2, ensure_ascii=False))
    return 0


def cmd_cache_stats(args: argparse.Namespace) -> int:
    if not args.cache_dir:
        raise ConfigError("cache-stats requires --cache-dir")
    cache, path = _open_cache(args)
    stats = cache.stats().to_dict()
    stats["path"] = str(path)
    print(json.dumps(stats, indent=2))
    return 0


def cmd_read_url(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    backends = _build_backends(args, cfg)
    raw = backends.fetcher.fetch_page(args.url)
    from .reader import parse_html

    doc = parse_html(raw, args.url)
    if doc.title:
        print(f"# {doc.title}\n")
    print(doc.text)
    return 0


def cmd_retrieve(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    backends = _build_backends(args, cfg)
    cache, cache_path = _open_cache(args)
    image = resize_shortest_edge(load_image(args.image), cfg.shortest_edge)
    trace = TraceRecorder()
    plan = route_search(image, args.question, cfg, backends, trace)
    outcome = run_retrieval(image, args.question, plan, cfg, backends, cache,
                            trace, urls_only=args.dry_run)
    _persist_cache(cache, cache_path)
    payload = {
        "plan": plan.to_dict(),
        "sub_queries": list(outcome.sub_queries),
        "urls": list(outcome.urls),
    }
    if not args.dry_run:
        payload["chunks"] = [c.to_dict() for c in outcome.chunks]
    print(json.dumps(payload, indent=2, ensure_ascii=False))
    return 0


_COMMANDS = {
    "ask": cmd_ask,
    "run": cmd_run,
    "judge": cmd_judge,
    "report": cmd_report,
    "ablate": cmd_ablate,
    "stats": cmd_stats,
    "cache-stats": cmd_cache_stats,
    "read-url": cmd_read_url,
    "retrieve": cmd_retrieve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BackendError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
