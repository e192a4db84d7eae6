from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from prefmo.errors import DomainError, ValidationError
from prefmo.fixtures import LEVEL_DIVERGENCE_HORIZON, level_divergence_instance, symmetric_instance
from prefmo.mdp import (
    DeterministicPolicy,
    MdpInstance,
    RandomizedPolicy,
    ScalarReward,
    VectorReward,
    evaluate_policy,
    enumerate_deterministic_policies,
    random_instance,
)
from prefmo.momdp import (
    ChebyshevScalarizer,
    LinearScalarizer,
    MonotoneScalarizer,
    aggregate,
    epsilon_cover,
    epsilon_cover_indices,
    lorenz_dominates,
    lorenz_vector,
    max_component,
    nondominated_mask,
    pareto_dominates,
    pareto_dominates_statewise,
    pareto_frontier,
    scalarize,
    vector_evaluate,
    verify_cover,
)

points_strategy = arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 3)),
    elements=st.floats(0, 10, allow_nan=False).map(lambda x: round(x, 2)),
)


def brute_force_nondominated(points):
    """Quadratic double loop over pairs."""
    keep = []
    for i, p in enumerate(points):
        dominated = False
        for j, q in enumerate(points):
            if j != i and all(qa >= pa for qa, pa in zip(q, p)) and any(qa > pa for qa, pa in zip(q, p)):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def smallest_cover_size(points, eps):
    """Try every subset in order of size."""
    n = len(points)
    for k in range(1, n + 1):
        for sub in itertools.combinations(range(n), k):
            if verify_cover(points[list(sub)], points, eps):
                return k
    return n


class TestDominance:
    def test_strict_improvement_required(self):
        assert pareto_dominates([1, 2], [1, 1])
        assert not pareto_dominates([1, 1], [1, 1])
        assert not pareto_dominates([2, 0], [0, 2])

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            pareto_dominates([1, 2], [1, 2, 3])

    def test_statewise(self):
        U = np.array([[1.0, 1.0], [2.0, 2.0]])
        assert pareto_dominates_statewise(U, U - [[0, 0], [0, 1]])
        assert not pareto_dominates_statewise(U, U[::-1])
        with pytest.raises(ValidationError):
            pareto_dominates_statewise([1.0, 2.0], [1.0, 1.0])

    def test_lorenz(self):
        assert np.allclose(lorenz_vector([3, 1, 2]), [1, 3, 6])
        # equal sum, more balanced wins
        assert lorenz_dominates([2, 2], [3, 1])
        assert not pareto_dominates([2, 2], [3, 1])

    @settings(max_examples=50, deadline=None)
    @given(
        u=arrays(np.float64, 3, elements=st.integers(-10, 10).map(float)),
        v=arrays(np.float64, 3, elements=st.integers(-10, 10).map(float)),
    )
    def test_pareto_implies_lorenz(self, u, v):
        if pareto_dominates(u, v):
            assert lorenz_dominates(u, v)
        assert not (pareto_dominates(u, v) and pareto_dominates(v, u))

    @settings(max_examples=50, deadline=None)
    @given(P=points_strategy)
    def test_mask_matches_quadratic_filter(self, P):
        assert np.flatnonzero(nondominated_mask(P)).tolist() == brute_force_nondominated(P.tolist())


class TestFrontier:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_quadratic_filter(self, seed):
        mdp = random_instance(3, 3, seed, reward="vector", dim=2, gamma=0.8)
        pols = list(enumerate_deterministic_policies(mdp))
        vecs = np.array([aggregate(mdp, vector_evaluate(mdp, p, 1e-12)) for p in pols])
        expected = {pols[i].actions for i in brute_force_nondominated(np.round(vecs, 9).tolist())}
        front = pareto_frontier(mdp, tol=1e-12)
        assert {p.actions for p in front.policies} == expected
        for a in front.vectors:
            for b in front.vectors:
                assert not pareto_dominates(a, b, atol=1e-10)

    def test_sorted_lexicographically(self):
        front = pareto_frontier(random_instance(3, 3, 11, reward="vector", dim=3))
        keys = [tuple(v) for v in front.vectors]
        assert keys == sorted(keys)

    def test_dominant_action_gives_singleton(self):
        mdp = random_instance(3, 3, 4, reward="vector", dim=2)
        R = np.array(mdp.vector_rewards())
        R[:, 2] = 2.0
        front = pareto_frontier(mdp.with_reward(VectorReward(R)))
        assert [p.actions for p in front.policies] == [(2, 2, 2)]

    def test_symmetric_instance(self):
        front = pareto_frontier(symmetric_instance())
        assert len(front) == 2
        assert np.allclose(front.vectors, [[0, 1], [1, 0]])


class TestEpsilonCover:
    @pytest.mark.parametrize("eps", [0.01, 0.5, 10.0])
    def test_axis_points_cover_only_themselves(self, eps):
        P = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert sorted(map(tuple, epsilon_cover(P, eps))) == [(0.0, 1.0), (1.0, 0.0)]

    @pytest.mark.parametrize("method", ["minimum", "greedy"])
    def test_near_duplicates_give_singleton(self, method):
        P = np.array([[1.0, 0.0], [1.05, 0.0]])
        assert len(epsilon_cover(P, 0.1, method)) == 1
        assert verify_cover([[1.0, 0.0]], P, 0.1)
        assert verify_cover([[1.05, 0.0]], P, 0.1)

    def test_random_cloud_no_larger_than_pareto_set(self):
        P = np.random.default_rng(0).uniform(0, 10, (200, 2))
        C = epsilon_cover(P, 0.05)
        assert verify_cover(C, P, 0.05)
        assert len(C) <= nondominated_mask(P).sum()

    def test_self_cover_and_empty_cover(self):
        P = np.random.default_rng(1).uniform(0, 1, (10, 3))
        assert verify_cover(P, P, 1e-9)
        assert not verify_cover(np.zeros((0, 3)), P, 0.1)

    @pytest.mark.parametrize("method", ["minimum", "greedy"])
    @settings(max_examples=40, deadline=None)
    @given(P=points_strategy, eps=st.sampled_from([0.01, 0.1, 0.5, 1.0]))
    def test_is_cover_and_subset(self, method, P, eps):
        idx = epsilon_cover_indices(P, eps, method)
        assert len(set(idx)) == len(idx)
        assert verify_cover(P[idx], P, eps)

    @settings(max_examples=40, deadline=None)
    @given(P=points_strategy)
    def test_minimum_is_smallest(self, P):
        if len(P) > 8:
            P = P[:8]
        for eps in (0.05, 0.3):
            assert len(epsilon_cover(P, eps)) == smallest_cover_size(P, eps)

    @settings(max_examples=40, deadline=None)
    @given(P=points_strategy)
    def test_size_non_increasing_in_epsilon(self, P):
        sizes = [len(epsilon_cover(P, e)) for e in (0.01, 0.05, 0.1, 0.3, 1.0)]
        assert sizes == sorted(sizes, reverse=True)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            epsilon_cover([[1.0]], 0.0)
        with pytest.raises(DomainError):
            epsilon_cover([[-1.0, 2.0]], 0.1)
        with pytest.raises(ValidationError):
            epsilon_cover([[1.0]], 0.1, method="fastest")

    def test_empty(self):
        assert epsilon_cover_indices(np.zeros((0, 2)), 0.1) == []

    def test_verify_cover_negative_case(self):
        assert not verify_cover([[1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], 0.5)


class TestScalarization:
    def test_linear_levels_agree(self):
        mdp = random_instance(3, 2, 5, reward="vector", dim=2, gamma=0.3)
        f = LinearScalarizer([0.4, 0.6])
        pol = DeterministicPolicy((0, 1, 0))
        H = 8
        vals = [scalarize(mdp, f, lvl, pol, horizon=H, tol=1e-13) for lvl in ("reward", "history", "value")]
        assert vals[0] == pytest.approx(vals[2], abs=1e-11)
        # the history level truncates after H steps; rewards lie in [0, 1]
        assert 0.0 <= vals[2] - vals[1] <= mdp.gamma**H / (1 - mdp.gamma)

    def test_nonlinear_levels_diverge(self):
        mdp = level_divergence_instance()
        f = max_component(2)
        pol = DeterministicPolicy((0, 0, 0, 0))
        hist = scalarize(mdp, f, "history", pol, horizon=LEVEL_DIVERGENCE_HORIZON, start=0)
        val = scalarize(mdp, f, "value", pol, start=0)
        assert hist == pytest.approx(1.0)
        assert val == pytest.approx(0.5)

    def test_history_level_needs_horizon(self):
        with pytest.raises(ValidationError):
            scalarize(symmetric_instance(), LinearScalarizer([1, 1]), "history", DeterministicPolicy((0,)))

    def test_unknown_level(self):
        with pytest.raises(ValidationError):
            scalarize(symmetric_instance(), LinearScalarizer([1, 1]), "episode", DeterministicPolicy((0,)))

    def test_non_monotone_rejected(self):
        with pytest.raises(ValidationError, match="monotone"):
            MonotoneScalarizer(lambda v: -float(v.sum()), dim=2)

    def test_chebyshev_scalarizer(self):
        f = ChebyshevScalarizer([1.0, 1.0])
        assert f([0.5, 0.5]) == pytest.approx(-0.5)
        assert f([1.0, 0.0]) == pytest.approx(-1.0)

    def test_randomized_value_level(self):
        mdp = symmetric_instance()
        pol = RandomizedPolicy([[0.5, 0.5]])
        assert scalarize(mdp, ChebyshevScalarizer([1.0, 1.0]), "value", pol) == pytest.approx(-0.5)


class TestVectorEvaluate:
    def test_geometric_series(self):
        mdp = MdpInstance(np.ones((1, 1, 1)), 0.5, VectorReward([[[1.0, 0.0]]]), [1.0])
        assert np.allclose(vector_evaluate(mdp, DeterministicPolicy((0,)), 1e-12), [[2.0, 0.0]])

    def test_zero_reward(self):
        mdp = random_instance(3, 2, 0, reward="vector", dim=2)
        mdp = mdp.with_reward(VectorReward(np.zeros((3, 2, 2))))
        assert np.all(vector_evaluate(mdp, RandomizedPolicy(np.full((3, 2), 0.5))) == 0.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_coordinate_projection(self, seed):
        mdp = random_instance(4, 3, seed, reward="vector", dim=3)
        pol = RandomizedPolicy(np.random.default_rng(seed).dirichlet(np.ones(3), size=4))
        V = vector_evaluate(mdp, pol, 1e-12)
        for i in range(3):
            scalar = mdp.with_reward(ScalarReward(mdp.vector_rewards()[:, :, i]))
            assert np.allclose(V[:, i], evaluate_policy(scalar, pol, 1e-12), atol=1e-9)


class TestLorenzExamples:
    def test_balanced_beats_extreme(self):
        assert lorenz_dominates([1, 1], [2, 0])

    def test_permutations_incomparable(self):
        assert not lorenz_dominates([3, 1, 2], [1, 2, 3])
        assert not lorenz_dominates([1, 2, 3], [3, 1, 2])

    @settings(max_examples=50, deadline=None)
    @given(
        u=arrays(np.float64, 4, elements=st.integers(-10, 10).map(float)),
        v=arrays(np.float64, 4, elements=st.integers(-10, 10).map(float)),
    )
    def test_sort_and_prefix_sum_oracle(self, u, v):
        def lorenz(x):
            out, total = [], 0.0
            for c in sorted(x):
                total += c
                out.append(total)
            return out

        lu, lv = lorenz(u), lorenz(v)
        expected = all(a >= b for a, b in zip(lu, lv)) and any(a > b for a, b in zip(lu, lv))
        assert lorenz_dominates(u, v) == expected
