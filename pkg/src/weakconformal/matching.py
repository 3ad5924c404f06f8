"""Assignment scores, a Hungarian solver, and the matching M-best backend.

An assignment over k agents/positions is a permutation y with y[u] the
position of agent u; its score is the sum of the chosen cost entries. The
solver is the O(k^3) shortest-augmenting-path Hungarian with row/column
potentials and supports forced pairs (contracted out of the problem) and
forbidden pairs (priced at a dominating sentinel, with a feasibility check
on the way out). That is exactly what the partition backend needs: a cell
of assignment space is "these pairs forced, those pairs forbidden", its
best is one constrained solve, and its second-best is the cheapest solve
over single-edge exclusions of the best.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .labels import FormatError, PartialMatching

__all__ = [
    "hungarian",
    "matching_score",
    "partial_matching_score",
    "min_matching_cost",
    "translated_score",
    "pad_costs",
    "read_cost_csv",
    "MatchingCell",
    "MatchingProblem",
]


def _as_cost_matrix(costs) -> np.ndarray:
    arr = np.asarray(costs, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ValueError("cost matrix must be square and nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("cost entries must be finite")
    return arr


def _solve_square(cost: list[list[float]]) -> tuple[list[int], float]:
    # Shortest augmenting paths with potentials; rows added in index order,
    # column ties broken by the lowest index.
    n = len(cost)
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = cost[i0 - 1]
            ui0 = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assignment = [0] * n
    for j in range(1, n + 1):
        assignment[p[j] - 1] = j - 1
    total = sum(cost[i][assignment[i]] for i in range(n))
    return assignment, total


def _check_constraints(
    k: int,
    forced: Iterable[tuple[int, int]],
    forbidden: Iterable[tuple[int, int]],
) -> tuple[dict[int, int], set[tuple[int, int]]]:
    forced_map: dict[int, int] = {}
    used_cols: set[int] = set()
    for uu, vv in forced:
        uu, vv = int(uu), int(vv)
        if not (0 <= uu < k and 0 <= vv < k):
            raise ValueError("forced pair out of range")
        if uu in forced_map or vv in used_cols:
            raise ValueError("forced pairs must be injective")
        forced_map[uu] = vv
        used_cols.add(vv)
    forbidden_set = set()
    for uu, vv in forbidden:
        uu, vv = int(uu), int(vv)
        if not (0 <= uu < k and 0 <= vv < k):
            raise ValueError("forbidden pair out of range")
        forbidden_set.add((uu, vv))
    if any((uu, vv) in forbidden_set for uu, vv in forced_map.items()):
        raise ValueError("a pair cannot be both forced and forbidden")
    return forced_map, forbidden_set


def hungarian(
    costs,
    forced: Iterable[tuple[int, int]] = (),
    forbidden: Iterable[tuple[int, int]] = (),
) -> tuple[tuple[int, ...], float] | None:
    """Minimum-cost perfect matching under pair constraints.

    Forced pairs are contracted out of the matrix; forbidden pairs get a
    sentinel cost derived from the remaining entries' span so that any
    assignment using one is worse than every clean assignment, and the
    result is checked for sentinel use afterwards. Returns (assignment,
    total cost on the original matrix), or None when no assignment satisfies
    the constraints. Inconsistent constraints (non-injective forced pairs, a
    pair both forced and forbidden) raise ValueError.
    """
    arr = _as_cost_matrix(costs)
    k = arr.shape[0]
    forced_map, forbidden_set = _check_constraints(k, forced, forbidden)

    free_rows = [uu for uu in range(k) if uu not in forced_map]
    used_cols = set(forced_map.values())
    free_cols = [vv for vv in range(k) if vv not in used_cols]
    full = [0] * k
    for uu, vv in forced_map.items():
        full[uu] = vv
    if not free_rows:
        return tuple(full), float(sum(arr[uu, full[uu]] for uu in range(k)))

    m = len(free_rows)
    sub = arr[np.ix_(free_rows, free_cols)]
    lo = float(sub.min())
    hi = float(sub.max())
    sentinel = hi + (hi - lo) * m + 1.0
    cost_list = sub.tolist()
    blocked = []
    for a, uu in enumerate(free_rows):
        for b, vv in enumerate(free_cols):
            if (uu, vv) in forbidden_set:
                cost_list[a][b] = sentinel
                blocked.append((a, b))
    assignment, _ = _solve_square(cost_list)
    for a, b in zip(range(m), assignment):
        if cost_list[a][b] >= sentinel:
            return None
    for a, b in zip(range(m), assignment):
        full[free_rows[a]] = free_cols[b]
    total = float(sum(arr[uu, full[uu]] for uu in range(k)))
    return tuple(full), total


def matching_score(costs, y: Sequence[int]) -> float:
    """Total cost of assignment y on the given matrix."""
    arr = _as_cost_matrix(costs)
    k = arr.shape[0]
    y = tuple(int(v) for v in y)
    if len(y) != k or set(y) != set(range(k)):
        raise ValueError("y must be a permutation assignment on [0, k)")
    return float(arr[np.arange(k), list(y)].sum())


def min_matching_cost(costs) -> float:
    """Cost of the best assignment (the translated score's offset)."""
    result = hungarian(costs)
    assert result is not None
    return result[1]


def translated_score(costs, y: Sequence[int], base: float | None = None) -> float:
    """matching_score shifted so every minimizer scores exactly 0.

    Pass base=min_matching_cost(costs) when scoring many candidates on the
    same matrix to avoid re-solving.
    """
    if base is None:
        base = min_matching_cost(costs)
    return matching_score(costs, y) - base


def partial_matching_score(costs, w: PartialMatching) -> float:
    """min over assignments extending the observed pairs of the raw score."""
    arr = _as_cost_matrix(costs)
    if w.k != arr.shape[0]:
        raise ValueError("weak label and cost matrix disagree on k")
    result = hungarian(arr, forced=w.pairs)
    assert result is not None  # no forbidden pairs: always feasible
    return result[1]


def pad_costs(costs, dummy_cost: float = 0.0) -> np.ndarray:
    """Square a rectangular cost matrix by adding virtual rows/columns."""
    arr = np.asarray(costs, dtype=float)
    if arr.ndim != 2:
        raise ValueError("cost matrix must be 2-dimensional")
    r, c = arr.shape
    k = max(r, c)
    out = np.full((k, k), float(dummy_cost))
    out[:r, :c] = arr
    return out


def read_cost_csv(path: str) -> np.ndarray:
    """Cost matrix file: one line with k, then k comma-separated rows."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    lines = [(i + 1, ln) for i, ln in enumerate(lines) if ln]
    if not lines:
        raise FormatError("empty cost matrix file", 1)
    try:
        k = int(lines[0][1])
    except ValueError as exc:
        raise FormatError("header must be the matrix size k", lines[0][0]) from exc
    if k < 1 or len(lines) != k + 1:
        raise FormatError(f"expected {k} rows after the header", lines[0][0])
    rows = []
    for lineno, ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != k:
            raise FormatError(f"expected {k} comma-separated entries", lineno)
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"non-numeric entry: {exc}", lineno) from exc
    return _as_cost_matrix(rows)


# --- partition backend ------------------------------------------------------


@dataclass(frozen=True)
class MatchingCell:
    """Assignments containing all forced pairs and no forbidden pair."""

    forced: tuple[tuple[int, int], ...]
    forbidden: frozenset[tuple[int, int]]
    best: tuple[int, ...]
    best_score: float
    second: tuple[int, ...] | None
    second_score: float | None

    def contains(self, y: Sequence[int]) -> bool:
        y = tuple(int(v) for v in y)
        return all(y[uu] == vv for uu, vv in self.forced) and not any(
            y[uu] == vv for uu, vv in self.forbidden
        )


class MatchingProblem:
    """PartitionProblem over assignments of a square cost matrix.

    Scores are matching costs minus ``offset`` (pass the minimum cost to
    work in translated scores; the enumeration order is unaffected).
    """

    def __init__(self, costs, offset: float = 0.0):
        self.costs = _as_cost_matrix(costs)
        self.k = self.costs.shape[0]
        self.offset = float(offset)

    def score(self, config: Sequence[int]) -> float:
        return matching_score(self.costs, config) - self.offset

    def _second_best(
        self,
        forced: tuple[tuple[int, int], ...],
        forbidden: frozenset[tuple[int, int]],
        best: tuple[int, ...],
    ) -> tuple[tuple[int, ...] | None, float | None]:
        forced_rows = {uu for uu, _ in forced}
        best_alt: tuple[int, ...] | None = None
        best_cost = math.inf
        for uu in range(self.k):
            if uu in forced_rows:
                continue
            result = hungarian(
                self.costs, forced=forced, forbidden=set(forbidden) | {(uu, best[uu])}
            )
            if result is not None and result[1] < best_cost:
                best_alt, best_cost = result[0], result[1]
        if best_alt is None:
            return None, None
        return best_alt, best_cost - self.offset

    def _cell(
        self, forced: tuple[tuple[int, int], ...], forbidden: frozenset[tuple[int, int]]
    ) -> MatchingCell | None:
        result = hungarian(self.costs, forced=forced, forbidden=forbidden)
        if result is None:
            return None
        best, cost = result
        second, second_score = self._second_best(forced, forbidden, best)
        return MatchingCell(
            forced=forced,
            forbidden=forbidden,
            best=best,
            best_score=cost - self.offset,
            second=second,
            second_score=second_score,
        )

    def root(self) -> MatchingCell:
        cell = self._cell((), frozenset())
        assert cell is not None
        return cell

    def split(self, cell: MatchingCell) -> tuple[MatchingCell, MatchingCell]:
        if cell.second is None:
            raise ValueError("cannot split a cell without a second-best")
        edge = None
        for uu in range(self.k):
            if cell.best[uu] != cell.second[uu]:
                edge = (uu, cell.best[uu])
                break
        assert edge is not None
        keep_forced = tuple(sorted(cell.forced + (edge,)))
        keep_second, keep_second_score = self._second_best(
            keep_forced, cell.forbidden, cell.best
        )
        keep = MatchingCell(
            forced=keep_forced,
            forbidden=cell.forbidden,
            best=cell.best,
            best_score=cell.best_score,
            second=keep_second,
            second_score=keep_second_score,
        )
        moved_forbidden = cell.forbidden | {edge}
        moved_second, moved_second_score = self._second_best(
            cell.forced, moved_forbidden, cell.second
        )
        moved = MatchingCell(
            forced=cell.forced,
            forbidden=moved_forbidden,
            best=cell.second,
            best_score=cell.second_score,
            second=moved_second,
            second_score=moved_second_score,
        )
        return keep, moved
