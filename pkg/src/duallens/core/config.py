"""Pipeline configuration: defaults, validation, JSON load/save."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from .types import Branch, RetrievalMode, parse_enum

# Domain taxonomy used by the domain router; "Other" is the mandatory fallback.
DEFAULT_DOMAINS: tuple[str, ...] = (
    "Plant",
    "Public Service",
    "Food",
    "Shopping",
    "Translation",
    "Transport",
    "Culture",
    "Navigation",
    "Animal",
    "Education",
    "Other",
)


class ConfigError(ValueError):
    """Raised when a configuration fails validation or cannot be loaded."""


@dataclass(frozen=True)
class PipelineConfig:
    # Retrieval gating
    retrieval_mode: RetrievalMode = RetrievalMode.DEMAND_ADAPTIVE
    branches: tuple[Branch, ...] = (Branch.VISUAL, Branch.TEXTUAL)
    use_object_detector: bool = True
    use_query_decoupler: bool = True

    # Search / context sizing
    top_n_pages: int = 5          # hits kept per search call
    top_k_chunks: int = 10        # chunks kept after fusion
    score_threshold: float = 0.6  # fused score must strictly exceed this
    visual_weight: float = 0.4
    textual_weight: float = 0.6
    max_objects: int = 3
    max_subqueries: int = 4

    # Media and chunking
    shortest_edge: int = 1024
    chunk_size_chars: int = 1000
    chunk_overlap_chars: int = 200

    # Model call behaviour
    temperature: float = 0.0
    max_tokens: int = 1024
    chat_retries: int = 1
    fetch_retries: int = 1

    # Execution
    parallelism: int = 1

    # Domain routing
    domains: tuple[str, ...] = DEFAULT_DOMAINS

    # Optional override directory for prompt templates; None = packaged defaults.
    prompt_dir: str | None = None

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, RetrievalMode):
                value = value.value
            elif f.name == "branches":
                value = [b.value for b in value]
            elif isinstance(value, tuple):
                value = list(value)
            data[f.name] = value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs: dict[str, Any] = dict(data)
        if "retrieval_mode" in kwargs:
            kwargs["retrieval_mode"] = parse_enum(RetrievalMode, kwargs["retrieval_mode"])
        if "branches" in kwargs:
            kwargs["branches"] = tuple(parse_enum(Branch, b) for b in kwargs["branches"])
        if "domains" in kwargs:
            kwargs["domains"] = tuple(kwargs["domains"])
        return cls(**kwargs)


def validate_config(cfg: PipelineConfig) -> list[str]:
    """Collect every violation instead of stopping at the first one."""
    problems: list[str] = []
    w_sum = cfg.visual_weight + cfg.textual_weight
    if abs(w_sum - 1.0) > 1e-9:
        problems.append(f"visual_weight + textual_weight must equal 1.0, got {w_sum}")
    for name in ("visual_weight", "textual_weight", "score_threshold"):
        value = getattr(cfg, name)
        if not 0.0 <= value <= 1.0:
            problems.append(f"{name} must lie in [0, 1], got {value}")
    for name in ("top_n_pages", "top_k_chunks", "max_objects", "max_subqueries",
                 "shortest_edge", "chunk_size_chars", "max_tokens", "parallelism"):
        value = getattr(cfg, name)
        if value < 1:
            problems.append(f"{name} must be >= 1, got {value}")
    if not 0 <= cfg.chunk_overlap_chars < cfg.chunk_size_chars:
        problems.append(
            f"chunk_overlap_chars must satisfy 0 <= overlap < chunk_size_chars, "
            f"got overlap={cfg.chunk_overlap_chars} size={cfg.chunk_size_chars}")
    if cfg.temperature < 0.0:
        problems.append(f"temperature must be >= 0, got {cfg.temperature}")
    for name in ("chat_retries", "fetch_retries"):
        if getattr(cfg, name) < 0:
            problems.append(f"{name} must be >= 0")
    if cfg.retrieval_mode is not RetrievalMode.NONE and not cfg.branches:
        problems.append("at least one retrieval branch is required unless retrieval_mode is None")
    if len(set(cfg.branches)) != len(cfg.branches):
        problems.append("duplicate entries in branches")
    if not cfg.domains:
        problems.append("domain taxonomy cannot be empty")
    elif "Other" not in cfg.domains:
        problems.append('domain taxonomy must include the "Other" fallback')
    return problems


def load_config(path: str | Path) -> PipelineConfig:
    """Load and validate a JSON config file; raises ConfigError on any problem."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    cfg = PipelineConfig.from_dict(raw)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")


def with_overrides(cfg: PipelineConfig, **overrides: Any) -> PipelineConfig:
    return replace(cfg, **overrides)


__all__ = [
    "ConfigError",
    "DEFAULT_DOMAINS",
    "PipelineConfig",
    "load_config",
    "save_config",
    "validate_config",
    "with_overrides",
]
