import math
from itertools import permutations

import numpy as np
import pytest

from weakconformal import (
    EnumerationCapExceeded,
    MatchingProblem,
    PartitionError,
    PsiSpec,
    RankingPrefix,
    RankingProblem,
    compatible_rank,
    enumerate_until,
    m_best,
    rank_conformalize,
    rank_score,
    weak_contains,
)


def _exhaustive_rank(rel, psi):
    return sorted(
        (rank_score(rel, p, psi), p) for p in permutations(range(len(rel)))
    )


def test_m_best_single_minimizer():
    problem = RankingProblem(np.array([3.0, 2.0, 1.0]), PsiSpec.hinge())
    res = m_best(problem, 1)
    assert res.configs == [(0, 1, 2)]
    assert res.scores == [0.0]


def test_m_best_full_space_matches_brute_force():
    rel = np.array([3.0, 2.0, 1.0])
    psi = PsiSpec.hinge()
    res = m_best(RankingProblem(rel, psi), 6)
    exact = _exhaustive_rank(rel, psi)
    assert len(res.configs) == 6
    np.testing.assert_allclose(res.scores, [s for s, _ in exact], atol=1e-12)
    assert sorted(res.configs) == sorted(p for _, p in exact)


def test_m_best_stops_at_space_size():
    res = m_best(RankingProblem(np.array([2.0, 1.0]), PsiSpec.hinge()), 10)
    assert len(res.configs) == 2
    assert not res.truncated


def test_m_best_scores_nondecreasing_random():
    rng = np.random.default_rng(21)
    for _ in range(30):
        rel = rng.normal(size=4)
        res = m_best(RankingProblem(rel, PsiSpec.exp_weighted(0.7)), 24)
        assert all(a <= b + 1e-12 for a, b in zip(res.scores, res.scores[1:]))
        assert len(set(res.configs)) == 24


def test_enumerate_until_threshold_below_minimum():
    problem = RankingProblem(np.array([3.0, 2.0, 1.0]), PsiSpec.hinge())
    res = enumerate_until(problem, -0.5)
    assert res.configs == []
    assert not res.truncated


def test_enumerate_until_exact_level_set():
    rel = np.array([3.0, 1.0, 2.0])
    psi = PsiSpec.hinge()
    exact = _exhaustive_rank(rel, psi)
    threshold = (exact[2][0] + exact[3][0]) / 2  # between 3rd and 4th best
    res = enumerate_until(RankingProblem(rel, psi), threshold)
    assert len(res.configs) == 3
    assert sorted(res.configs) == sorted(p for _, p in exact[:3])


def test_enumerate_until_infinite_threshold_caps():
    problem = RankingProblem(np.arange(5.0), PsiSpec.hinge())
    res = enumerate_until(problem, math.inf, cap=100)
    assert len(res.configs) == 100
    assert res.truncated


def test_enumerate_until_not_truncated_when_exhausted():
    problem = RankingProblem(np.array([2.0, 1.0, 0.0]), PsiSpec.hinge())
    res = enumerate_until(problem, math.inf, cap=50)
    assert len(res.configs) == 6
    assert not res.truncated


def test_compatible_rank_best_config_compatible():
    rel = np.array([3.0, 2.0, 1.0])
    problem = RankingProblem(rel, PsiSpec.hinge())
    prefix = RankingPrefix((0,), 3)
    assert compatible_rank(problem, lambda y: weak_contains(prefix, y)) == 1


def test_compatible_rank_matches_brute_force():
    rng = np.random.default_rng(22)
    psi = PsiSpec.hinge()
    for _ in range(40):
        rel = rng.normal(size=3)
        first = int(rng.integers(3))
        prefix = RankingPrefix((first,), 3)
        problem = RankingProblem(rel, psi)
        got = compatible_rank(problem, lambda y: weak_contains(prefix, y))
        order = [p for _, p in _exhaustive_rank(rel, psi)]
        want = 1 + next(i for i, p in enumerate(order) if p[0] == first)
        # ties among equal scores make either order legal; compare scores
        got_score = rank_score(rel, m_best(problem, got).configs[-1], psi)
        want_score = _exhaustive_rank(rel, psi)[want - 1][0]
        assert got_score == pytest.approx(want_score, abs=1e-9)


def test_compatible_rank_cap_exceeded():
    problem = RankingProblem(np.arange(4.0), PsiSpec.hinge())
    with pytest.raises(EnumerationCapExceeded):
        compatible_rank(problem, lambda y: False, cap=10)


def test_rank_conformalize_spec_example():
    assert rank_conformalize([1, 1, 2, 3], [0, 0, 0, 0], alpha=0.25) == 3


def test_rank_conformalize_all_best():
    assert rank_conformalize([1, 1, 1], [1, 1, 1], alpha=0.5) == 0


def test_rank_conformalize_infinite_when_too_few():
    assert rank_conformalize([1, 2], [0, 0], alpha=0.05) == math.inf


def test_rank_conformalize_rejects_empty():
    with pytest.raises(ValueError):
        rank_conformalize([], [], alpha=0.1)


def test_rank_conformalize_weak_coverage():
    # exchangeable ranks: sets built with offset+quantile cover the truth
    rng = np.random.default_rng(23)
    hits = trials = 0
    for _ in range(200):
        ranks = rng.integers(1, 30, size=51)
        cal, test = list(map(int, ranks[:50])), int(ranks[50])
        q = rank_conformalize(cal, [0] * 50, alpha=0.2)
        trials += 1
        hits += test <= q
    assert hits / trials >= 0.8 - 0.05


class _BadCells:
    """Backend whose split discards the parent's best: must be rejected."""

    class Cell:
        def __init__(self, lo, hi):
            self.lo, self.hi = lo, hi
            self.best = lo
            self.best_score = float(lo)
            self.second = lo + 1 if lo + 1 < hi else None
            self.second_score = float(lo + 1) if lo + 1 < hi else math.inf

    def root(self):
        return self.Cell(0, 4)

    def split(self, cell):
        # wrong on purpose: both children skip the parent's best config
        return self.Cell(cell.lo + 1, cell.hi), self.Cell(cell.lo + 2, cell.hi)

    def score(self, config):
        return float(config)


def test_invalid_partition_detected():
    with pytest.raises(PartitionError):
        m_best(_BadCells(), 4)


def test_matching_backend_through_engine():
    rng = np.random.default_rng(24)
    for _ in range(20):
        costs = rng.normal(size=(3, 3))
        res = m_best(MatchingProblem(costs), 6)
        exact = sorted(
            sum(costs[i, p[i]] for i in range(3)) for p in permutations(range(3))
        )
        np.testing.assert_allclose(res.scores, exact, atol=1e-9)
