from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from prefmo.errors import SingularBasisError, ValidationError
from prefmo.fixtures import decreasing_order_counterexample
from prefmo.mdp import (
    DeterministicPolicy,
    History,
    MdpInstance,
    RandomizedPolicy,
    SymbolicReward,
    enumerate_deterministic_policies,
    random_instance,
    sample_history,
)
from prefmo.momdp import vector_evaluate
from prefmo.transforms import (
    OrderedHistories,
    RewardOrder,
    canonicalize,
    counting_reward,
    decumulative,
    difference_weights,
    dominance_soundness_check,
    first_difference,
    history_basis_matrix,
    history_count_vector,
    ordered_history_transform,
    ordered_reward_transform,
    random_ordered_histories,
    sample_increasing,
    verify_lemma1,
    verify_lemma2,
)


def three_label_instance(gamma=0.5):
    """One state, three actions carrying labels 0, 1, 2."""
    return MdpInstance(np.ones((1, 3, 1)), gamma, SymbolicReward([[0, 1, 2]], 3), [1.0])


def random_symbolic(seed, S=4, A=3, d=3, gamma=0.8):
    return random_instance(S, A, seed, gamma=gamma, reward="symbolic", dim=d)


def random_policy(mdp, seed):
    return RandomizedPolicy(np.random.default_rng(seed).dirichlet(np.ones(mdp.n_actions), size=mdp.n_states))


class TestRewardOrder:
    def test_rejects_non_permutation(self):
        with pytest.raises(ValidationError):
            RewardOrder((0, 0, 1))

    def test_rank_and_admissibility(self):
        order = RewardOrder((2, 0, 1))
        assert order.rank.tolist() == [1, 2, 0]
        assert order.is_admissible([1.0, 2.0, 0.0])
        assert not order.is_admissible([0.0, 1.0, 2.0])
        assert not order.is_admissible([1.0, 1.0, 0.0])

    def test_canonicalize(self):
        mdp = three_label_instance()
        canon = canonicalize(mdp, RewardOrder((2, 0, 1)))
        assert canon.reward.labels.tolist() == [[1, 2, 0]]
        with pytest.raises(ValidationError):
            canonicalize(mdp, RewardOrder((0, 1)))


class TestCounting:
    def test_one_hot(self):
        R = counting_reward(three_label_instance()).values
        assert R[0, 1].tolist() == [0.0, 1.0, 0.0]

    def test_single_label(self):
        mdp = MdpInstance(np.ones((1, 2, 1)), 0.5, SymbolicReward([[0, 0]], 1), [1.0])
        assert np.all(counting_reward(mdp).values == 1.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_column_sums_are_label_tallies(self, seed):
        mdp = random_symbolic(seed, S=5, A=3, d=4)
        R = counting_reward(mdp).values
        tally = np.bincount(mdp.reward.labels.ravel(), minlength=4)
        assert R.sum(axis=(0, 1)).tolist() == tally.tolist()

    def test_requires_symbolic(self):
        with pytest.raises(ValidationError):
            counting_reward(random_instance(2, 2, 0))


class TestDecumulative:
    def test_examples(self):
        assert decumulative([1, 2, 3]).tolist() == [6, 5, 3]
        assert decumulative([0, 1, 0]).tolist() == [1, 1, 0]

    @settings(max_examples=50, deadline=None)
    @given(
        u=arrays(np.float64, 4, elements=st.integers(-100, 100).map(float)),
        v=arrays(np.float64, 4, elements=st.integers(-100, 100).map(float)),
    )
    def test_linear_and_invertible(self, u, v):
        assert np.array_equal(decumulative(u + v), decumulative(u) + decumulative(v))
        assert np.array_equal(first_difference(decumulative(u)), u)

    def test_difference_weights(self):
        assert difference_weights([0, 1, 5]).tolist() == [0, 1, 4]


class TestOrderedRewardTransform:
    def test_step_vectors(self):
        R = ordered_reward_transform(three_label_instance()).vector_rewards()
        assert R[0].tolist() == [[1, 0, 0], [1, 1, 0], [1, 1, 1]]

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_decumulative_of_counts(self, seed):
        mdp = random_symbolic(seed)
        pol = random_policy(mdp, seed)
        vvec = vector_evaluate(ordered_reward_transform(mdp), pol, 1e-13)
        vbar = vector_evaluate(mdp.with_reward(counting_reward(mdp)), pol, 1e-13)
        assert np.allclose(vvec, decumulative(vbar), atol=1e-10)

    def test_order_is_applied(self):
        mdp = three_label_instance()
        R = ordered_reward_transform(mdp, RewardOrder((2, 1, 0))).vector_rewards()
        assert R[0, 0].tolist() == [1, 1, 1]
        assert R[0, 2].tolist() == [1, 0, 0]


class TestHistoryCounts:
    def test_single_step(self):
        mdp = MdpInstance(np.ones((1, 2, 1)), 0.5, SymbolicReward([[0, 1]], 2), [1.0])
        assert history_count_vector(mdp, History((0, 0), (1,))).tolist() == [0.0, 1.0]
        assert history_count_vector(mdp, History((0,))).tolist() == [0.0, 0.0]

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 1000), t1=st.integers(0, 4), t2=st.integers(0, 4))
    def test_additivity(self, seed, t1, t2):
        mdp = random_symbolic(seed)
        h = sample_history(mdp, random_policy(mdp, seed), t1 + t2, seed)
        h1, h2 = History(h.states[: t1 + 1], h.actions[:t1]), History(h.states[t1:], h.actions[t1:])
        lhs = history_count_vector(mdp, h)
        rhs = history_count_vector(mdp, h1) + mdp.gamma**t1 * history_count_vector(mdp, h2)
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestBasisMatrix:
    def pure_histories(self):
        return OrderedHistories(tuple(History((0, 0), (a,)) for a in range(3)))

    def test_identity(self):
        b = history_basis_matrix(three_label_instance(), self.pure_histories())
        assert np.array_equal(b.H, np.eye(3))
        assert np.array_equal(b.H_inv, np.eye(3))

    def test_duplicate_history_is_singular(self):
        hs = OrderedHistories((History((0, 0), (0,)), History((0, 0), (0,)), History((0, 0), (2,))))
        with pytest.raises(SingularBasisError):
            history_basis_matrix(three_label_instance(), hs)

    def test_wrong_count(self):
        with pytest.raises(ValidationError):
            history_basis_matrix(three_label_instance(), OrderedHistories((History((0, 0), (0,)),)))

    def test_condition_limit(self):
        mdp = three_label_instance()
        hs = OrderedHistories((History((0, 0), (0,)), History((0, 0, 0), (0, 1)), History((0, 0), (2,))))
        b = history_basis_matrix(mdp, hs)
        with pytest.raises(SingularBasisError):
            history_basis_matrix(mdp, hs, max_condition=b.condition / 2)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_inverse_residual(self, seed):
        mdp = random_symbolic(seed)
        _, b = random_ordered_histories(mdp, np.random.default_rng(seed))
        assert np.max(np.abs(b.H @ b.H_inv - np.eye(3))) <= 1e-8

    def test_values_round_trip(self):
        mdp = random_symbolic(7)
        _, b = random_ordered_histories(mdp, np.random.default_rng(7))
        r = np.array([0.5, 1.0, 3.0])
        assert np.allclose(b.history_values(b.reward_values(r)), r)


class TestOrderedHistoryTransform:
    def test_identity_basis_matches_ordered_rewards(self):
        mdp = three_label_instance()
        hs = OrderedHistories(tuple(History((0, 0), (a,)) for a in range(3)))
        a = ordered_history_transform(mdp, hs).vector_rewards()
        b = ordered_reward_transform(mdp).vector_rewards()
        assert np.array_equal(a, b)

    def test_single_label(self):
        mdp = MdpInstance(np.ones((1, 2, 1)), 0.5, SymbolicReward([[0, 0]], 1), [1.0])
        h = History((0, 0, 0), (0, 1))  # count 1 + 0.5
        out = ordered_history_transform(mdp, OrderedHistories((h,)))
        assert np.allclose(out.vector_rewards(), 1 / 1.5)
        x = 4.0
        r1 = 1.5 * x
        vvec = vector_evaluate(out, DeterministicPolicy((0,)))
        assert r1 * vvec[0, 0] == pytest.approx(x / (1 - 0.5), abs=1e-8)


class TestLemmas:
    def test_lemma1_hand_example(self):
        mdp = three_label_instance()
        pol = DeterministicPolicy((1,))
        x = np.array([0.0, 1.0, 5.0])
        assert verify_lemma1(mdp, RewardOrder.identity(3), x, pol) <= 1e-10
        vvec = vector_evaluate(ordered_reward_transform(mdp), pol, 1e-13)[0]
        assert np.allclose(vvec, [2, 2, 0])
        assert difference_weights(x) @ vvec == pytest.approx(2.0)

    def test_lemma1_rejects_non_increasing(self):
        with pytest.raises(ValidationError):
            verify_lemma1(three_label_instance(), RewardOrder.identity(3), [1.0, 1.0, 2.0], DeterministicPolicy((0,)))

    @pytest.mark.parametrize("seed", range(8))
    def test_lemma1_random(self, seed):
        mdp = random_symbolic(seed)
        rng = np.random.default_rng(seed)
        order = RewardOrder(tuple(rng.permutation(3).tolist()))
        x = np.empty(3)
        x[list(order.ascending)] = sample_increasing(3, 1, rng)[0]
        assert verify_lemma1(mdp, order, x, random_policy(mdp, seed)) <= 1e-8

    def test_lemma2_identity_reduces_to_lemma1(self):
        mdp = three_label_instance()
        hs = OrderedHistories(tuple(History((0, 0), (a,)) for a in range(3)))
        x = [0.0, 1.0, 5.0]
        pol = DeterministicPolicy((2,))
        assert verify_lemma2(mdp, hs, x, pol) == pytest.approx(verify_lemma1(mdp, RewardOrder.identity(3), x, pol), abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_lemma2_random(self, seed):
        mdp = random_symbolic(seed)
        rng = np.random.default_rng(seed)
        hs, b = random_ordered_histories(mdp, rng)
        x = b.reward_values(sample_increasing(3, 1, rng)[0])
        assert verify_lemma2(mdp, hs, x, random_policy(mdp, seed), basis=b) <= 1e-6

    def test_lemma2_rejects_non_increasing_history_values(self):
        mdp = three_label_instance()
        hs = OrderedHistories(tuple(History((0, 0), (a,)) for a in range(3)))
        with pytest.raises(ValidationError):
            verify_lemma2(mdp, hs, [2.0, 1.0, 3.0], DeterministicPolicy((0,)))


class TestSoundness:
    @pytest.mark.parametrize("seed", range(3))
    def test_ordered_rewards_sound(self, seed):
        mdp = random_symbolic(seed, S=3, A=2, d=3)
        rep = dominance_soundness_check(mdp, ordered_reward_transform(mdp), n=50, seed=seed)
        assert rep.passed
        assert rep.samples == 50

    @pytest.mark.parametrize("seed", range(3))
    def test_ordered_histories_sound(self, seed):
        mdp = random_symbolic(seed, S=3, A=2, d=3)
        hs, b = random_ordered_histories(mdp, np.random.default_rng(seed))
        rep = dominance_soundness_check(mdp, ordered_history_transform(mdp, hs, b), n=50, seed=seed, basis=b)
        assert rep.passed

    def test_decreasing_values_counterexample(self):
        mdp, x = decreasing_order_counterexample()
        rep = dominance_soundness_check(mdp, ordered_reward_transform(mdp), true_values=x)
        assert not rep.passed
        assert rep.counterexample["dominating_policy"] == (1,)
        assert rep.counterexample["dominated_policy"] == (0,)

    def test_pairs_are_counted(self):
        mdp, _ = decreasing_order_counterexample()
        rep = dominance_soundness_check(mdp, ordered_reward_transform(mdp), n=10)
        assert rep.passed
        assert rep.pairs_checked == 1
        assert len(list(enumerate_deterministic_policies(mdp))) == 2
