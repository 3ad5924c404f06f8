"""
Greedy randomized label sets on a three-label toy distribution
==============================================================

When nothing but the weak-set distribution is known, the smallest set that
intersects the weak set with a target probability is a set-cover problem.
The greedy order solves it exactly here, and a coin flip between two nested
sets hits any coverage level on the nose.
"""
import numpy as np

from weakconformal.greedy import (
    DiscreteWeakDistribution,
    brute_force_optimal,
    check_structure,
    greedy_sequence,
    nested_score,
    set_from_sequence,
    wolsey_constant,
)

# the weak set takes five possible values over labels {0, 1, 2}
dist = DiscreteWeakDistribution.from_sets(
    3,
    [((0, 1), 0.3), ((0, 2), 0.25), ((1,), 0.2), ((2,), 0.15), ((0,), 0.1)],
)
print("structure:", check_structure(dist).name)

seq = greedy_sequence(dist)
print("greedy order:", seq.order)
print("prefix coverages:", [round(c, 4) for c in seq.cum_coverage])

# a randomized set at level 0.9: outer set with probability t, inner with 1-t
rs = set_from_sequence(seq, 0.9)
print(f"\nlevel 0.9: inner {sorted(rs.inner)}, outer {sorted(rs.outer)}, "
      f"t = {rs.t:.4f}, expected size {rs.expected_size:.4f}")
for u in (0.1, 0.5):
    print(f"  u = {u}: realized set {sorted(rs.realize(u))}")

# exhaustive search over all randomized sets confirms greedy is beatable here:
# a mixture that ignores the greedy prefix is strictly smaller at eta = 0.9
value, mixture = brute_force_optimal(dist, 0.9)
pretty = " + ".join(f"{w:.2f}*{sorted(s)}" for s, w in mixture)
print(f"\nbrute-force optimum at 0.9: expected size {value:.4f} via {pretty}")
print(f"greedy suboptimality factor here: {rs.expected_size / value:.4f}")

# the general-case guarantee: greedy is within (1 + log K) of the best
# deterministic cover, with K an instance-dependent curvature constant
for eta in (0.6, 0.85, 0.9):
    print(f"wolsey constant at eta={eta}: {wolsey_constant(dist, eta):.4f}")

# the same greedy family, read as a score: the level at which each label
# enters the realized set (uniform randomness u shared across labels)
u = 0.25
print("\nnested scores at u = 0.25:",
      {y: round(nested_score(seq, y, u), 4) for y in range(3)})

# averaging the realized coverage over u recovers the level exactly
rng = np.random.default_rng(0)
hits = 0
draws = 20000
atoms, probs = zip(*dist.atom_sets())
for _ in range(draws):
    w = atoms[rng.choice(len(atoms), p=probs)]
    realized = rs.realize(rng.uniform())
    hits += bool(realized & set(w))
print(f"Monte Carlo weak coverage at level 0.9: {hits / draws:.4f}")
