"""Two-layer retrieval cache.

Layer 1 maps a search key (normalized text query, or an image content key) to
the list of result URLs. Layer 2 maps a URL to its parsed CleanDoc. Empty
results are cached; errors are not. Concurrent requests for the same missing
key execute the fill thunk exactly once; the other callers wait and share the
value.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .reader import CleanDoc

_MAGIC = b"DLCACHE1"
_L1_TAG = 1
_L2_TAG = 2


class CachePersistenceError(ValueError):
    """Raised when a cache file is corrupt or has the wrong format."""


@dataclass(frozen=True)
class CacheStats:
    l1_hits: int
    l1_misses: int
    l2_hits: int
    l2_misses: int
    l1_entries: int
    l2_entries: int

    def to_dict(self) -> dict[str, int]:
        return {
            "l1_hits": self.l1_hits, "l1_misses": self.l1_misses,
            "l2_hits": self.l2_hits, "l2_misses": self.l2_misses,
            "l1_entries": self.l1_entries, "l2_entries": self.l2_entries,
        }


class _InFlight:
    """A fill in progress; waiters block until the owner publishes."""

    def __init__(self) -> None:
        self.event = threading.Event()
        self.value: object = None
        self.error: BaseException | None = None


class TwoLayerCache:
    def __init__(self) -> None:
        self._l1: dict[str, list[str]] = {}
        self._l2: dict[str, CleanDoc] = {}
        self._lock = threading.Lock()
        self._inflight: dict[tuple[int, str], _InFlight] = {}
        self._hits = {_L1_TAG: 0, _L2_TAG: 0}
        self._misses = {_L1_TAG: 0, _L2_TAG: 0}

    # -- generic fill machinery -------------------------------------------

    def _get_or_fill(self, layer: int, store: dict, key: str, thunk: Callable[[], object]):
        """Returns (value, was_hit). The thunk runs at most once per missing key."""
        with self._lock:
            if key in store:
                self._hits[layer] += 1
                return store[key], True
            flight = self._inflight.get((layer, key))
            if flight is None:
                flight = _InFlight()
                self._inflight[(layer, key)] = flight
                owner = True
            else:
                owner = False

        if owner:
            try:
                value = thunk()
            except BaseException as exc:
                with self._lock:
                    self._misses[layer] += 1
                    del self._inflight[(layer, key)]
                flight.error = exc
                flight.event.set()
                raise
            with self._lock:
                store[key] = value
                self._misses[layer] += 1
                del self._inflight[(layer, key)]
            flight.value = value
            flight.event.set()
            return value, False

        flight.event.wait()
        if flight.error is not None:
            # The owner failed; errors are never cached, so surface it here
            # too and let the caller decide whether to retry.
            with self._lock:
                self._misses[layer] += 1
            raise flight.error
        with self._lock:
            self._hits[layer] += 1
        return flight.value, True

    # -- public API ---------------------------------------------------------

    def get_or_search(self, key: str, thunk: Callable[[], list[str]]) -> tuple[list[str], bool]:
        """Layer-1 lookup: key -> URL list. Empty lists are cached results."""
        value, hit = self._get_or_fill(_L1_TAG, self._l1, key, thunk)
        return list(value), hit  # defensive copy; the store stays immutable

    def get_or_parse(self, url: str, thunk: Callable[[], CleanDoc]) -> tuple[CleanDoc, bool]:
        """Layer-2 lookup: url -> parsed document."""
        value, hit = self._get_or_fill(_L2_TAG, self._l2, url, thunk)
        return value, hit

    def peek_urls(self, key: str) -> list[str] | None:
        with self._lock:
            value = self._l1.get(key)
            return list(value) if value is not None else None

    def peek_doc(self, url: str) -> CleanDoc | None:
        with self._lock:
            return self._l2.get(url)

    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(
                l1_hits=self._hits[_L1_TAG], l1_misses=self._misses[_L1_TAG],
                l2_hits=self._hits[_L2_TAG], l2_misses=self._misses[_L2_TAG],
                l1_entries=len(self._l1), l2_entries=len(self._l2),
            )

    def clear(self) -> None:
        """Empty both layers; hit/miss counters persist."""
        with self._lock:
            self._l1.clear()
            self._l2.clear()

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write both layers as length-prefixed binary records."""
        with self._lock:
            l1 = dict(self._l1)
            l2 = dict(self._l2)
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            for key, urls in l1.items():
                _write_record(fh, _L1_TAG, key, json.dumps(urls, ensure_ascii=False))
            for url, doc in l2.items():
                _write_record(fh, _L2_TAG, url, json.dumps(doc.to_dict(), ensure_ascii=False))

    def load(self, path: str | Path) -> int:
        """Merge records from a cache file into this cache; returns record count."""
        raw = Path(path).read_bytes()
        if raw[:len(_MAGIC)] != _MAGIC:
            raise CachePersistenceError(f"not a cache file: {path}")
        offset = len(_MAGIC)
        count = 0
        while offset < len(raw):
            tag, key, value, offset = _read_record(raw, offset)
            if tag == _L1_TAG:
                parsed = json.loads(value)
                if not isinstance(parsed, list):
                    raise CachePersistenceError("layer-1 record is not a URL list")
                with self._lock:
                    self._l1[key] = [str(u) for u in parsed]
            elif tag == _L2_TAG:
                doc = CleanDoc.from_dict(json.loads(value))
                with self._lock:
                    self._l2[key] = doc
            else:
                raise CachePersistenceError(f"unknown layer tag {tag}")
            count += 1
        return count


def _write_record(fh, tag: int, key: str, value: str) -> None:
    key_b = key.encode("utf-8")
    val_b = value.encode("utf-8")
    fh.write(struct.pack(">BII", tag, len(key_b), len(val_b)))
    fh.write(key_b)
    fh.write(val_b)


def _read_record(raw: bytes, offset: int) -> tuple[int, str, str, int]:
    header = struct.calcsize(">BII")
    if offset + header > len(raw):
        raise CachePersistenceError("truncated cache record header")
    tag, key_len, val_len = struct.unpack_from(">BII", raw, offset)
    offset += header
    if offset + key_len + val_len > len(raw):
        raise CachePersistenceError("truncated cache record body")
    key = raw[offset:offset + key_len].decode("utf-8")
    offset += key_len
    value = raw[offset:offset + val_len].decode("utf-8")
    offset += val_len
    return tag, key, value, offset


__all__ = ["CachePersistenceError", "CacheStats", "TwoLayerCache"]
