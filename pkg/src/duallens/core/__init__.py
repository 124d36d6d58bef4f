"""Core types, configuration and serialization."""

from .config import (
    DEFAULT_DOMAINS,
    ConfigError,
    PipelineConfig,
    load_config,
    save_config,
    validate_config,
    with_overrides,
)
from .jsonio import (
    canonical_json,
    digest16,
    extract_first_json,
    extract_first_json_object,
    load_judgments,
    load_records,
    read_jsonl,
    save_judgments,
    save_records,
    save_tasks,
    write_jsonl,
)
from .types import (
    SEARCH_KINDS,
    AnswerMode,
    AnswerRecord,
    BBox,
    Branch,
    Category,
    Difficulty,
    Dynamism,
    EvidenceChunk,
    HopAnnotation,
    Judgment,
    QueryTask,
    RetrievalMode,
    RetrievalPlan,
    SearchHit,
    SearchTool,
    ToolCall,
    ToolKind,
    ValidationError,
    parse_enum,
    record_fingerprint,
    records_equivalent,
    validate_record,
)

__all__ = [name for name in dir() if not name.startswith("_")]
