import json
import math

import numpy as np
import pytest

from weakconformal import (
    DiscreteWeakDistribution,
    Structure,
    check_structure,
    greedy_sequence,
    greedy_set,
    label_independent_nested_scores,
    label_independent_sequence,
    marginal_allocation,
    nested_score,
    nested_score_vector,
    set_from_sequence,
    size_profile,
    wolsey_constant,
)

# Three-label distribution used for the pinned golden values below:
# {0,1}: .3, {0,2}: .25, {1}: .2, {2}: .15, {0}: .1
GOLDEN_ATOMS = [((0, 1), 0.3), ((0, 2), 0.25), ((1,), 0.2), ((2,), 0.15), ((0,), 0.1)]


@pytest.fixture
def golden_dist():
    return DiscreteWeakDistribution.from_sets(3, GOLDEN_ATOMS)


def test_golden_greedy_sequence(golden_dist):
    seq = greedy_sequence(golden_dist)
    assert seq.order == (0, 1, 2)
    assert abs(seq.cum_coverage[0] - 0.65) < 1e-12
    assert abs(seq.cum_coverage[1] - 0.85) < 1e-12
    assert abs(seq.cum_coverage[2] - 1.0) < 1e-12


def test_golden_randomized_set_at_ninety(golden_dist):
    rs = greedy_set(golden_dist, 0.9)
    assert rs.inner == frozenset({0, 1})
    assert rs.outer == frozenset({0, 1, 2})
    assert abs(rs.t - 1.0 / 3.0) < 1e-12
    assert rs.realize(0.2) == frozenset({0, 1, 2})
    assert rs.realize(1.0 / 3.0) == frozenset({0, 1})
    assert rs.realize(0.9) == frozenset({0, 1})


def test_golden_brute_force_optimum(golden_dist):
    prof = size_profile(golden_dist)
    value, mixture = prof.optimal_mixture(0.9)
    assert abs(value - 2.0) < 1e-12
    assert mixture == ((frozenset({1, 2}), 1.0),)


def test_brute_force_optimum_realigns_stated_claim(golden_dist):
    # At level 0.85 the best deterministic pair {1,2} covers 0.9 and the
    # optimum is a mixture of {0} and {1,2} with expected size 1.8.
    prof = size_profile(golden_dist)
    value, mixture = prof.optimal_mixture(0.85)
    assert value == pytest.approx(1.8, abs=1e-9)
    sets = {s: w for s, w in mixture}
    assert set(sets) == {frozenset({0}), frozenset({1, 2})}
    assert sets[frozenset({0})] == pytest.approx(0.2, abs=1e-9)


def test_golden_wolsey_constant(golden_dist):
    # exhaustive increment table gives min(18, 8/3, 13/3) = 8/3
    assert wolsey_constant(golden_dist, 0.9) == pytest.approx(8.0 / 3.0, abs=1e-12)


def test_wolsey_singletons_is_one():
    dist = DiscreteWeakDistribution.from_sets(
        4, [((i,), 0.25) for i in range(4)]
    )
    for eta in (0.2, 0.5, 0.8, 0.99):
        assert wolsey_constant(dist, eta) == pytest.approx(1.0)


def test_greedy_tie_breaks_toward_smallest_label():
    dist = DiscreteWeakDistribution.from_sets(2, [((0,), 0.5), ((1,), 0.5)])
    assert greedy_sequence(dist).order == (0, 1)


def test_exact_hit_takes_outer_deterministically():
    dist = DiscreteWeakDistribution.from_sets(
        4, [((i,), 0.25) for i in range(4)]
    )
    rs = set_from_sequence(greedy_sequence(dist), 0.5)
    assert rs.t == 1.0
    assert rs.outer == frozenset({0, 1})
    assert rs.expected_size == pytest.approx(2.0)


def test_low_eta_yields_randomized_singleton(golden_dist):
    rs = greedy_set(golden_dist, 0.325)
    assert rs.inner == frozenset()
    assert rs.outer == frozenset({0})
    assert rs.t == pytest.approx(0.5)  # 0.325 / 0.65
    assert rs.realize(0.9) == frozenset()


def _random_dist(rng, k):
    m = int(rng.integers(1, 2 * k))
    seen = {}
    for _ in range(m):
        size = int(rng.integers(1, k + 1))
        s = tuple(sorted(int(v) for v in rng.choice(k, size=size, replace=False)))
        seen[s] = seen.get(s, 0.0) + 1.0
    total = sum(seen.values())
    return DiscreteWeakDistribution.from_sets(
        k, [(s, v / total) for s, v in seen.items()]
    )


def test_coverage_exactness_identity():
    # E_u[P(W hits realized set)] must equal eta for any dist and eta
    rng = np.random.default_rng(8)
    for _ in range(100):
        k = int(rng.integers(2, 8))
        dist = _random_dist(rng, k)
        seq = greedy_sequence(dist)
        for eta in rng.uniform(0.01, 0.999, size=5):
            rs = set_from_sequence(seq, eta)
            expected = rs.t * dist.coverage(rs.outer) + (1 - rs.t) * dist.coverage(
                rs.inner
            )
            assert abs(expected - eta) < 1e-9


def test_realized_sets_nested_in_eta():
    rng = np.random.default_rng(9)
    for _ in range(50):
        dist = _random_dist(rng, int(rng.integers(2, 8)))
        seq = greedy_sequence(dist)
        u = float(rng.uniform())
        etas = np.sort(rng.uniform(0.01, 0.999, size=6))
        realized = [set_from_sequence(seq, e).realize(u) for e in etas]
        for small, big in zip(realized, realized[1:]):
            assert small <= big


def test_nested_score_matches_set_membership():
    rng = np.random.default_rng(10)
    for _ in range(50):
        k = int(rng.integers(2, 8))
        dist = _random_dist(rng, k)
        seq = greedy_sequence(dist)
        u = float(rng.uniform())
        eta = float(rng.uniform(0.05, 0.995))
        realized = set_from_sequence(seq, eta).realize(u)
        for y in range(k):
            assert (nested_score(seq, y, u) <= eta) == (y in realized)


def test_nested_score_vector_consistent():
    dist = DiscreteWeakDistribution.from_sets(3, GOLDEN_ATOMS)
    seq = greedy_sequence(dist)
    vec = nested_score_vector(seq, 0.37)
    for y in range(3):
        assert vec[y] == nested_score(seq, y, 0.37)


def test_label_independent_sequence_hand_values():
    # q = (.7, .4, .2): nonempty-normalizer 1 - .3*.6*.8 = .856,
    # cumulative coverage (.7, .82, 1) / .856
    seq = label_independent_sequence(np.array([0.7, 0.4, 0.2]))
    assert seq.order == (0, 1, 2)
    assert seq.cum_coverage[0] == pytest.approx(0.7 / 0.856, abs=1e-12)
    assert seq.cum_coverage[1] == pytest.approx(0.82 / 0.856, abs=1e-12)
    assert seq.cum_coverage[2] == pytest.approx(1.0, abs=1e-12)


def test_label_independent_sequence_matches_atom_expansion():
    rng = np.random.default_rng(12)
    for _ in range(25):
        k = int(rng.integers(2, 7))
        q = rng.uniform(0.05, 0.95, size=k)
        direct = label_independent_sequence(q)
        via_atoms = greedy_sequence(DiscreteWeakDistribution.from_marginals(k, q))
        assert direct.order == via_atoms.order
        np.testing.assert_allclose(direct.cum_coverage, via_atoms.cum_coverage, atol=1e-9)


def test_batched_nested_scores_match_scalar_path():
    rng = np.random.default_rng(13)
    q = rng.uniform(0.05, 0.95, size=(20, 5))
    u = rng.uniform(size=20)
    batch = label_independent_nested_scores(q, u)
    for i in range(20):
        seq = label_independent_sequence(q[i])
        np.testing.assert_allclose(
            batch[i], nested_score_vector(seq, float(u[i])), atol=1e-12
        )


def test_from_marginals_atom_probabilities():
    # k = 2, q = (.5, .2): P({0}) = .4/.6, P({1}) = .1/.6, P({0,1}) = .1/.6
    dist = DiscreteWeakDistribution.from_marginals(2, [0.5, 0.2])
    probs = dict(dist.atom_sets())
    assert probs[(0,)] == pytest.approx(0.4 / 0.6)
    assert probs[(1,)] == pytest.approx(0.1 / 0.6)
    assert probs[(0, 1)] == pytest.approx(0.1 / 0.6)


def test_structure_golden_is_general(golden_dist):
    assert check_structure(golden_dist) is Structure.GENERAL


def test_structure_laminar_support_is_tree():
    dist = DiscreteWeakDistribution.from_sets(
        5,
        [
            ((0,), 0.2),
            ((2,), 0.1),
            ((0, 2), 0.25),
            ((1, 4), 0.15),
            ((0, 1, 2, 3, 4), 0.3),
        ],
    )
    assert check_structure(dist) is Structure.TREE


def test_structure_product_form_is_label_independent():
    dist = DiscreteWeakDistribution.from_marginals(4, [0.6, 0.3, 0.5, 0.1])
    assert check_structure(dist) is Structure.LABEL_INDEPENDENT


def test_structure_perturbed_product_is_general():
    dist = DiscreteWeakDistribution.from_marginals(3, [0.6, 0.3, 0.5])
    atoms = dist.atom_sets()
    bumped = [(s, p) for s, p in atoms]
    # move mass between two atoms: marginal fixed points break
    sets = [s for s, _ in bumped]
    i, j = sets.index((0,)), sets.index((0, 1, 2))
    delta = 0.05
    bumped[i] = (bumped[i][0], bumped[i][1] - delta)
    bumped[j] = (bumped[j][0], bumped[j][1] + delta)
    dist2 = DiscreteWeakDistribution.from_sets(3, bumped)
    assert check_structure(dist2) is Structure.GENERAL


def test_structure_point_mass_singleton():
    dist = DiscreteWeakDistribution.from_sets(3, [((1,), 1.0)])
    assert check_structure(dist) is Structure.LABEL_INDEPENDENT


def test_size_profile_hand_values(golden_dist):
    prof = size_profile(golden_dist)
    assert prof.best_covs[1] == pytest.approx(0.65)
    assert prof.best_covs[2] == pytest.approx(0.9)
    assert prof.best_covs[3] == pytest.approx(1.0)
    # halfway between the size-1 and size-2 hull points
    value, _ = prof.optimal_mixture(0.775)
    assert value == pytest.approx(1.5, abs=1e-9)


def test_min_cover_size(golden_dist):
    prof = size_profile(golden_dist)
    assert prof.min_cover_size(0.9) == 2
    assert prof.min_cover_size(0.91) == 3
    assert prof.min_cover_size(0.6) == 1


def test_size_profile_rejects_large_spaces():
    atoms = [((i,), 1.0 / 21) for i in range(21)]
    dist = DiscreteWeakDistribution.from_sets(21, atoms)
    with pytest.raises(ValueError):
        size_profile(dist)


def test_distribution_json_round_trip(golden_dist):
    payload = golden_dist.to_json()
    parsed = json.loads(json.dumps(payload))
    back = DiscreteWeakDistribution.from_json(parsed)
    assert back.atom_sets() == golden_dist.atom_sets()
    assert back.k == golden_dist.k


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteWeakDistribution.from_sets(2, [((0,), 0.5)])  # mass != 1
    with pytest.raises(ValueError):
        DiscreteWeakDistribution.from_sets(2, [((0,), 0.5), ((0,), 0.5)])
    with pytest.raises(ValueError):
        DiscreteWeakDistribution.from_sets(2, [((), 1.0)])


def test_coverage_values(golden_dist):
    assert golden_dist.coverage([0]) == pytest.approx(0.65)
    assert golden_dist.coverage([1, 2]) == pytest.approx(0.9)
    assert golden_dist.coverage([]) == 0.0
    assert golden_dist.coverage([0, 1, 2]) == pytest.approx(1.0)


def test_marginal_allocation_single_curve_reduces_to_conditional():
    alloc = marginal_allocation([[0.6, 1.0]], [1.0], alpha=0.1)
    assert alloc.etas[0] == pytest.approx(0.9)
    assert alloc.achieved_coverage == pytest.approx(0.9)


def test_marginal_allocation_identical_curves_share_level():
    curves = [[0.5, 0.8, 1.0]] * 3
    alloc = marginal_allocation(curves, [1 / 3] * 3, alpha=0.2)
    for eta in alloc.etas:
        assert eta == pytest.approx(0.8)


def test_marginal_allocation_prefers_cheap_coverage():
    # curve 0 buys coverage at 0.9 per unit size, curve 1 at 0.5 per unit
    cheap = [0.9, 1.0]
    dear = [0.5, 1.0]
    alloc = marginal_allocation([cheap, dear], [0.5, 0.5], alpha=0.25)
    assert alloc.etas[0] > alloc.etas[1]
    assert alloc.achieved_coverage == pytest.approx(0.75)


def test_marginal_allocation_beats_uniform_levels():
    # LP objective: allocation total size must not exceed the uniform split
    rng = np.random.default_rng(14)
    for _ in range(20):
        n_x = int(rng.integers(2, 5))
        curves = []
        for _ in range(n_x):
            k = int(rng.integers(2, 6))
            raw = np.sort(rng.uniform(size=k - 1))
            curves.append(list(raw) + [1.0])
        w = rng.dirichlet(np.ones(n_x))
        alpha = float(rng.uniform(0.05, 0.5))
        alloc = marginal_allocation(curves, w, alpha)
        assert alloc.achieved_coverage >= 1 - alpha - 1e-9

        def size_at(curve, eta):
            pts = [0.0] + list(curve)
            for j in range(1, len(pts)):
                if pts[j] >= eta - 1e-12:
                    prev = pts[j - 1]
                    if pts[j] <= prev + 1e-15:
                        return float(j)
                    return (j - 1) + (eta - prev) / (pts[j] - prev)
            return float(len(curve))

        uniform_total = sum(
            wi * size_at(c, 1 - alpha) for wi, c in zip(w, curves)
        )
        assert alloc.total_expected_size <= uniform_total + 1e-9


def test_marginal_allocation_flags_hull_projection():
    concave = [0.7, 0.9, 1.0]
    bumpy = [0.1, 0.9, 1.0]  # size-2 point lies above the chord: stays
    convex_gap = [0.1, 0.2, 1.0]  # middle point below the chord: projected
    alloc = marginal_allocation([concave, bumpy, convex_gap], [1 / 3] * 3, 0.1)
    assert alloc.hull_projected[0] is False
    assert alloc.hull_projected[2] is True


def test_marginal_allocation_validates():
    with pytest.raises(ValueError):
        marginal_allocation([[0.5, 1.0]], [0.7], 0.1)  # weights not normalized
    with pytest.raises(ValueError):
        marginal_allocation([[0.9, 0.5]], [1.0], 0.1)  # decreasing curve
    with pytest.raises(ValueError):
        marginal_allocation([[0.5, 0.9]], [1.0], 0.1)  # does not reach 1
