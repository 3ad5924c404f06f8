"""Weak-label containers and dataset records.

A weak label is a set of candidate ground truths known to contain the true
label: an explicit set of class ids, a numeric interval, the top segment of a
ranking, or a partial assignment. Everything downstream (calibration,
evaluation, set construction) talks to these four types.

Label ids, ranking items and matching nodes are 0-based everywhere,
including the JSON-lines serialization.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Union

import numpy as np

__all__ = [
    "ExplicitSet",
    "Interval",
    "RankingPrefix",
    "PartialMatching",
    "WeakLabel",
    "WeakRecord",
    "weak_contains",
    "weak_to_payload",
    "weak_from_payload",
    "write_jsonl",
    "read_jsonl",
    "FormatError",
]


class FormatError(ValueError):
    """Malformed serialized record; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ExplicitSet:
    """Nonempty set of candidate class ids, stored sorted."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labs = tuple(int(v) for v in self.labels)
        if len(labs) == 0:
            raise ValueError("weak label set must be nonempty")
        if any(v < 0 for v in labs):
            raise ValueError("labels must be nonnegative ids")
        if len(set(labs)) != len(labs):
            raise ValueError("labels must be distinct")
        object.__setattr__(self, "labels", tuple(sorted(labs)))

    def validate_k(self, k: int) -> None:
        if self.labels[-1] >= k:
            raise ValueError(f"label {self.labels[-1]} out of range for k={k}")


@dataclass(frozen=True)
class Interval:
    """Closed numeric interval [lo, hi] of candidate responses."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("interval endpoints must be finite")
        if lo > hi:
            raise ValueError(f"empty interval: lo={lo} > hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class RankingPrefix:
    """The observed top of a ranking over k items.

    ``items[j]`` is the item ranked at position j; the weak label is the set
    of full rankings that start with exactly this segment.
    """

    items: tuple[int, ...]
    k: int

    def __post_init__(self):
        items = tuple(int(v) for v in self.items)
        k = int(self.k)
        if len(items) > k:
            raise ValueError("prefix longer than the item count")
        if len(set(items)) != len(items):
            raise ValueError("prefix items must be distinct")
        if any(not 0 <= v < k for v in items):
            raise ValueError("prefix items must be in [0, k)")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "k", k)


@dataclass(frozen=True)
class PartialMatching:
    """Observed pairs (u, v) of a perfect matching on k+k nodes."""

    pairs: tuple[tuple[int, int], ...]
    k: int

    def __post_init__(self):
        pairs = tuple((int(u), int(v)) for u, v in self.pairs)
        k = int(self.k)
        if len(pairs) > k:
            raise ValueError("more pairs than nodes")
        us = [u for u, _ in pairs]
        vs = [v for _, v in pairs]
        if len(set(us)) != len(us) or len(set(vs)) != len(vs):
            raise ValueError("pairs must be injective on both sides")
        if any(not (0 <= u < k and 0 <= v < k) for u, v in pairs):
            raise ValueError("pair ids must be in [0, k)")
        object.__setattr__(self, "pairs", tuple(sorted(pairs)))
        object.__setattr__(self, "k", k)


WeakLabel = Union[ExplicitSet, Interval, RankingPrefix, PartialMatching]


def weak_contains(weak: WeakLabel, y: Any) -> bool:
    """Whether candidate ``y`` is a member of the weak label set."""
    if isinstance(weak, ExplicitSet):
        return int(y) in weak.labels
    if isinstance(weak, Interval):
        return weak.lo <= float(y) <= weak.hi
    if isinstance(weak, RankingPrefix):
        y = tuple(int(v) for v in y)
        if len(y) != weak.k or set(y) != set(range(weak.k)):
            raise ValueError("candidate is not a ranking of [0, k)")
        return y[: len(weak.items)] == weak.items
    if isinstance(weak, PartialMatching):
        y = tuple(int(v) for v in y)
        if len(y) != weak.k or set(y) != set(range(weak.k)):
            raise ValueError("candidate is not an assignment on [0, k)")
        return all(y[u] == v for u, v in weak.pairs)
    raise TypeError(f"not a weak label: {type(weak).__name__}")


@dataclass(frozen=True)
class WeakRecord:
    """One observation: features, weak label, and (optionally) the truth."""

    x: np.ndarray
    weak: WeakLabel
    y: Any = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise ValueError("x must be a flat feature vector")
        object.__setattr__(self, "x", x)
        if self.y is not None and not weak_contains(self.weak, self.y):
            raise ValueError("inconsistent record: y is not in its weak label")


# --- JSON-lines serialization -------------------------------------------
#
# One record per line: {"x": [...], "weak": {...}, "y": ...}
# with weak payloads
#   {"kind": "set",      "labels": [ids]}
#   {"kind": "interval", "lo": f, "hi": f}
#   {"kind": "prefix",   "items": [ids], "k": K}
#   {"kind": "matching", "pairs": [[u, v], ...], "k": K}


def weak_to_payload(weak: WeakLabel) -> dict[str, Any]:
    if isinstance(weak, ExplicitSet):
        return {"kind": "set", "labels": list(weak.labels)}
    if isinstance(weak, Interval):
        return {"kind": "interval", "lo": weak.lo, "hi": weak.hi}
    if isinstance(weak, RankingPrefix):
        return {"kind": "prefix", "items": list(weak.items), "k": weak.k}
    if isinstance(weak, PartialMatching):
        return {"kind": "matching", "pairs": [list(p) for p in weak.pairs], "k": weak.k}
    raise TypeError(f"not a weak label: {type(weak).__name__}")


def weak_from_payload(payload: dict[str, Any]) -> WeakLabel:
    try:
        kind = payload["kind"]
        if kind == "set":
            return ExplicitSet(tuple(payload["labels"]))
        if kind == "interval":
            return Interval(payload["lo"], payload["hi"])
        if kind == "prefix":
            return RankingPrefix(tuple(payload["items"]), payload["k"])
        if kind == "matching":
            return PartialMatching(tuple(map(tuple, payload["pairs"])), payload["k"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed weak payload: {exc}") from exc
    raise ValueError(f"unknown weak label kind {kind!r}")


def _y_to_json(y: Any) -> Any:
    if y is None:
        return None
    if isinstance(y, (tuple, list, np.ndarray)):
        return [int(v) for v in y]
    if isinstance(y, (int, np.integer)):
        return int(y)
    return float(y)


def write_jsonl(path: str, records: Iterable[WeakRecord]) -> int:
    """Write records as JSON lines; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "x": [float(v) for v in rec.x],
                "weak": weak_to_payload(rec.weak),
                "y": _y_to_json(rec.y),
            }
            fh.write(json.dumps(obj) + "\n")
            n += 1
    return n


def read_jsonl(path: str) -> Iterator[WeakRecord]:
    """Yield records from a JSON-lines file, validating each line.

    Raises FormatError with the offending 1-based line number on malformed
    JSON, unknown payloads, or a record whose y falls outside its weak label.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", lineno) from exc
            try:
                weak = weak_from_payload(obj["weak"])
                y = obj.get("y")
                if y is not None and isinstance(y, list):
                    y = tuple(y)
                yield WeakRecord(np.asarray(obj["x"], dtype=float), weak, y)
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(str(exc), lineno) from exc
