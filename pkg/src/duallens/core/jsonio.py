"""JSON / JSONL helpers shared across the package."""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Any, Iterable, Iterator

from .types import AnswerRecord, Judgment, QueryTask


def canonical_json(obj: Any) -> str:
    """Stable serialization used for digests: sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def digest16(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def write_jsonl(path: str | Path, rows: Iterable[dict[str, Any]]) -> int:
    """Write one JSON object per line; returns the number of rows written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, parsed object) for each non-blank line."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            yield line_no, json.loads(line)


def save_records(records: Iterable[AnswerRecord], path: str | Path) -> int:
    return write_jsonl(path, (r.to_dict() for r in records))


def load_records(path: str | Path) -> list[AnswerRecord]:
    return [AnswerRecord.from_dict(row) for _, row in read_jsonl(path)]


def save_judgments(judgments: Iterable[Judgment], path: str | Path) -> int:
    return write_jsonl(path, (j.to_dict() for j in judgments))


def load_judgments(path: str | Path) -> list[Judgment]:
    return [Judgment.from_dict(row) for _, row in read_jsonl(path)]


def save_tasks(tasks: Iterable[QueryTask], path: str | Path) -> int:
    return write_jsonl(path, (t.to_dict() for t in tasks))


_JSON_START = re.compile(r"[{\[]")


def extract_first_json(text: str) -> Any:
    """Extract and parse the first balanced JSON value embedded in free text.

    Model replies often wrap JSON in prose or code fences; this scans for the
    first opening brace/bracket that starts a parseable value. Raises
    ValueError when no balanced JSON value exists.
    """
    decoder = json.JSONDecoder()
    for match in _JSON_START.finditer(text):
        try:
            value, _ = decoder.raw_decode(text, match.start())
        except json.JSONDecodeError:
            continue
        return value
    raise ValueError("no balanced JSON value found in text")


def extract_first_json_object(text: str) -> dict[str, Any]:
    """Like extract_first_json but only accepts JSON objects."""
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\{", text):
        try:
            value, _ = decoder.raw_decode(text, match.start())
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            return value
    raise ValueError("no balanced JSON object found in text")


__all__ = [
    "canonical_json",
    "digest16",
    "extract_first_json",
    "extract_first_json_object",
    "load_judgments",
    "load_records",
    "read_jsonl",
    "save_judgments",
    "save_records",
    "save_tasks",
    "write_jsonl",
]
