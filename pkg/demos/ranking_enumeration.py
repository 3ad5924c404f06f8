"""
Prediction sets over rankings without scoring all K! permutations
=================================================================

Sub-level sets of a permutation score are enumerated best-first through a
branch-and-partition engine, so a confidence set over rankings costs time
proportional to its own size. Calibration can work purely with ranks.
"""
import numpy as np

from weakconformal.labels import RankingPrefix
from weakconformal.mbest import compatible_rank, m_best, rank_conformalize
from weakconformal.ranking import (
    PsiSpec,
    RankingProblem,
    best_ranking,
    partial_rank_score,
    rank_score,
)

psi = PsiSpec.hinge()
rel = np.array([2.1, -0.3, 1.4, 0.2])  # one record's item relevances

# the score counts relevance inversions; the relevance-descending ranking is 0
best = best_ranking(rel)
print("best ranking:", best, "score", rank_score(rel, best, psi))

# enumerate the eight best rankings in score order
result = m_best(RankingProblem(rel, psi), 8)
for config, score in zip(result.configs, result.scores):
    print(f"  {config}  {score:.3f}")

# rank-based conformal calibration: each calibration record contributes the
# rank of its true ranking among all permutations of its own relevances
rng = np.random.default_rng(3)
ranks, offsets = [], []
for _ in range(60):
    r = rng.normal(size=4)
    truth = tuple(int(v) for v in rng.permutation(4))  # noisy pretend label
    ranks.append(compatible_rank(RankingProblem(r, psi), lambda c: c == truth))
    offsets.append(0)
m_star = rank_conformalize(np.array(ranks), np.array(offsets), alpha=0.2)
print(f"\ncalibrated rank cutoff: keep the {m_star} best rankings per record")

# a weak ranking label: only the top of the ranking is revealed; its partial
# score is the best completion's score, computable without enumeration
prefix = RankingPrefix((0, 2), 4)
print("partial score for prefix (0, 2):", partial_rank_score(rel, prefix, psi))
