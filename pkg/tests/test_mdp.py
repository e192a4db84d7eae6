from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefmo.errors import CapExceededError, ValidationError
from prefmo.fixtures import one_state_instance
from prefmo.mdp import (
    DeterministicPolicy,
    History,
    MdpInstance,
    MixedPolicy,
    RandomizedPolicy,
    ScalarReward,
    SymbolicReward,
    bellman_backup,
    chain_instance,
    enumerate_deterministic_policies,
    enumerate_histories,
    evaluate_policy,
    history_value,
    random_instance,
    sample_history,
    sample_paths,
    truncation_horizon,
    value_iteration,
)


def exact_value(mdp, policy):
    """Linear-solve oracle for ``v = r_pi + gamma P_pi v``."""
    pm = policy.matrix(mdp.n_actions)
    P = np.einsum("sa,sat->st", pm, mdp.transition)
    r = (pm * mdp.scalar_rewards()).sum(axis=1)
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P, r)


def coin_chain():
    """Two states, one action, each step lands on either state with probability 1/2."""
    return MdpInstance(np.full((2, 1, 2), 0.5), 0.5, ScalarReward([[1.0], [0.0]]), [0.5, 0.5])


class TestInstanceValidation:
    def test_probability_sum_error_names_pair(self):
        T = np.zeros((2, 2, 2))
        T[:, :, 0] = 1.0
        T[1, 0] = (0.5, 0.4)
        with pytest.raises(ValidationError, match=r"s=1, a=0"):
            MdpInstance(T, 0.9, ScalarReward(np.zeros((2, 2))), [0.5, 0.5])

    @pytest.mark.parametrize("gamma", [-0.1, 1.0, 1.5])
    def test_discount_range(self, gamma):
        with pytest.raises(ValidationError):
            MdpInstance(np.ones((1, 1, 1)), gamma, ScalarReward([[1.0]]), [1.0])

    def test_initial_distribution_must_be_positive(self):
        T = np.full((2, 1, 2), 0.5)
        with pytest.raises(ValidationError):
            MdpInstance(T, 0.5, ScalarReward(np.zeros((2, 1))), [1.0, 0.0])

    def test_unused_symbolic_label_rejected(self):
        with pytest.raises(ValidationError, match="not used"):
            SymbolicReward([[0, 0]], 2)

    def test_reward_shape_checked(self):
        with pytest.raises(ValidationError):
            MdpInstance(np.ones((1, 1, 1)), 0.5, ScalarReward([[1.0, 2.0]]), [1.0])

    def test_instance_arrays_are_read_only(self):
        mdp = one_state_instance()
        with pytest.raises(ValueError):
            mdp.transition[0, 0, 0] = 0.5


class TestEvaluatePolicy:
    def test_geometric_series(self):
        v = evaluate_policy(one_state_instance(1.0, 0.5), DeterministicPolicy((0,)))
        assert v[0] == pytest.approx(2.0, abs=1e-8)

    def test_zero_reward_gives_zero(self):
        mdp = random_instance(4, 3, 0)
        mdp = mdp.with_reward(ScalarReward(np.zeros((4, 3))))
        pol = RandomizedPolicy(np.full((4, 3), 1 / 3))
        assert np.all(evaluate_policy(mdp, pol) == 0.0)

    def test_residual_within_tolerance(self):
        mdp = random_instance(6, 3, 1, gamma=0.95)
        pol = DeterministicPolicy((0, 1, 2, 0, 1, 2))
        tol = 1e-9
        v = evaluate_policy(mdp, pol, tol)
        pm = pol.matrix(3)
        backup = (pm * bellman_backup(mdp, v)).sum(axis=1)
        assert np.max(np.abs(backup - v)) <= tol

    def test_matches_linear_solve(self):
        mdp = random_instance(5, 2, 3, gamma=0.9)
        pol = DeterministicPolicy((1, 0, 1, 1, 0))
        assert np.allclose(evaluate_policy(mdp, pol, 1e-12), exact_value(mdp, pol), atol=1e-10)

    def test_monte_carlo_oracle(self):
        """Seed-7 instance: plain trajectory simulation agrees within 3 standard errors."""
        mdp = random_instance(6, 3, 7, gamma=0.9)
        pol = RandomizedPolicy(np.random.default_rng(7).dirichlet(np.ones(3), size=6))
        v = evaluate_policy(mdp, pol, 1e-12)
        rng = np.random.default_rng(7)
        n, H = 100_000, truncation_horizon(0.9, 1e-10)
        s = rng.choice(6, size=n, p=mdp.initial)
        total = np.zeros(n)
        disc = 1.0
        R = mdp.scalar_rewards()
        for _ in range(H):
            a = (rng.random(n)[:, None] > np.cumsum(pol.probs[s], axis=1)).sum(axis=1)
            total += disc * R[s, a]
            s = (rng.random(n)[:, None] > np.cumsum(mdp.transition[s, a], axis=1)).sum(axis=1)
            s = np.minimum(s, 5)
            disc *= 0.9
        se = total.std(ddof=1) / np.sqrt(n)
        assert abs(total.mean() - mdp.initial @ v) <= 3 * se

    def test_rejects_mixed_and_symbolic(self):
        mdp = one_state_instance()
        mixed = MixedPolicy((DeterministicPolicy((0,)),), (1.0,))
        with pytest.raises(ValidationError):
            evaluate_policy(mdp, mixed)
        sym = mdp.with_reward(SymbolicReward([[0]], 1))
        with pytest.raises(ValidationError):
            evaluate_policy(sym, DeterministicPolicy((0,)))


class TestValueIteration:
    def test_dominant_action(self):
        mdp = MdpInstance(np.ones((1, 2, 1)), 0.5, ScalarReward([[0.0, 1.0]]), [1.0])
        v, pol = value_iteration(mdp)
        assert v[0] == pytest.approx(2.0, abs=1e-12)
        assert pol.actions == (1,)

    def test_myopic_case(self):
        mdp = random_instance(4, 3, 2, gamma=0.0)
        v, _ = value_iteration(mdp)
        assert np.allclose(v, mdp.scalar_rewards().max(axis=1))

    def test_ties_go_to_lowest_action(self):
        mdp = MdpInstance(np.ones((1, 3, 1)), 0.5, ScalarReward([[1.0, 1.0, 1.0]]), [1.0])
        assert value_iteration(mdp)[1].actions == (0,)

    @pytest.mark.parametrize("seed", range(5))
    def test_enumeration_oracle(self, seed):
        mdp = random_instance(5, 2, 100 + seed, gamma=0.9)
        v, _ = value_iteration(mdp, 1e-12)
        best = np.max([exact_value(mdp, p) for p in enumerate_deterministic_policies(mdp)], axis=0)
        assert np.allclose(v, best, atol=1e-8)

    def test_bellman_optimality_residual(self):
        mdp = random_instance(6, 3, 5, gamma=0.95)
        tol = 1e-9
        v, _ = value_iteration(mdp, tol)
        assert np.max(np.abs(bellman_backup(mdp, v).max(axis=1) - v)) <= tol

    def test_greedy_policy_value_close_to_optimum(self):
        mdp = random_instance(6, 3, 6, gamma=0.9)
        tol = 1e-6
        v, pol = value_iteration(mdp, tol)
        assert np.max(np.abs(evaluate_policy(mdp, pol, tol) - v)) <= 2 * tol / (1 - mdp.gamma)

    def test_contraction_of_iterates(self):
        mdp = random_instance(5, 3, 8, gamma=0.8)
        v = np.zeros(5)
        prev_delta = None
        for _ in range(40):
            nxt = bellman_backup(mdp, v).max(axis=1)
            delta = np.max(np.abs(nxt - v))
            if prev_delta is not None:
                assert delta <= mdp.gamma * prev_delta + 1e-12
            prev_delta, v = delta, nxt


class TestHistories:
    def test_two_step_value(self):
        mdp = MdpInstance(np.ones((1, 1, 1)), 0.5, ScalarReward([[1.0]]), [1.0])
        assert history_value(mdp, History((0, 0, 0), (0, 0))) == 1.5

    def test_empty_history(self):
        assert history_value(one_state_instance(), History((0,))) == 0.0

    def test_invalid_transition_rejected(self):
        mdp = chain_instance(0.5, [1.0, 2.0, 3.0])
        with pytest.raises(ValidationError):
            history_value(mdp, History((0, 2), (0,)))

    def test_direct_summation_oracle(self):
        mdp = random_instance(6, 3, 7, gamma=0.9)
        h = sample_history(mdp, DeterministicPolicy((0, 1, 2, 0, 1, 2)), 3, seed=7)
        R = mdp.scalar_rewards()
        expected = 0.0
        for i in range(3):
            expected += 0.9**i * R[h.states[i], h.actions[i]]
        assert history_value(mdp, h) == pytest.approx(expected, abs=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), t1=st.integers(0, 4), t2=st.integers(0, 4))
    def test_additivity(self, seed, t1, t2):
        mdp = random_instance(4, 2, seed, gamma=0.8)
        pol = RandomizedPolicy(np.full((4, 2), 0.5))
        h = sample_history(mdp, pol, t1 + t2, seed=seed)
        h1 = History(h.states[: t1 + 1], h.actions[:t1])
        h2 = History(h.states[t1:], h.actions[t1:])
        assert h1 + h2 == h
        lhs = history_value(mdp, h)
        rhs = history_value(mdp, h1) + mdp.gamma**t1 * history_value(mdp, h2)
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestEnumerateHistories:
    def test_deterministic_single_entry(self):
        mdp = chain_instance(0.5, [1.0, 2.0, 3.0])
        out = enumerate_histories(mdp, DeterministicPolicy((0, 0, 0)), 4, start=0)
        assert len(out) == 1
        assert out[0][1] == 1.0
        assert out[0][0].states == (0, 1, 2, 2, 2)

    def test_coin_chain_quarters(self):
        out = enumerate_histories(coin_chain(), DeterministicPolicy((0, 0)), 2, start=0)
        assert len(out) == 4
        assert all(p == 0.25 for _, p in out)

    @pytest.mark.parametrize("seed", range(4))
    def test_probabilities_sum_to_one(self, seed):
        mdp = random_instance(3, 2, seed, sparsity=0.3)
        out = enumerate_histories(mdp, RandomizedPolicy(np.full((3, 2), 0.5)), 4)
        probs = np.array([p for _, p in out])
        assert np.all(probs > 0)
        assert abs(probs.sum() - 1.0) <= 1e-9
        for h, _ in out:
            h.validate(mdp)

    def test_cap(self):
        mdp = random_instance(3, 2, 0)
        with pytest.raises(CapExceededError):
            enumerate_histories(mdp, RandomizedPolicy(np.full((3, 2), 0.5)), 6, cap=1000)

    def test_sampling_frequencies_match_enumeration(self):
        mdp = random_instance(6, 3, 7, gamma=0.9)
        pol = RandomizedPolicy(np.full((6, 3), 1 / 3))
        H, n = 3, 100_000
        exact = np.zeros(6)
        for h, p in enumerate_histories(mdp, pol, H):
            exact[h.states[-1]] += p
        states, _ = sample_paths(mdp, pol, H, n, seed=7)
        freq = np.bincount(states[:, -1], minlength=6) / n
        se = np.sqrt(exact * (1 - exact) / n)
        assert np.all(np.abs(freq - exact) <= 3 * se + 1e-12)


class TestSampling:
    def test_deterministic_chain(self):
        mdp = chain_instance(0.5, [0.0, 1.0, 2.0])
        for seed in range(3):
            assert sample_history(mdp, DeterministicPolicy((0, 0, 0)), 3, seed, start=0).states == (0, 1, 2, 2)

    def test_same_seed_same_history(self):
        mdp = random_instance(5, 3, 1)
        pol = RandomizedPolicy(np.full((5, 3), 1 / 3))
        assert sample_history(mdp, pol, 10, seed=42) == sample_history(mdp, pol, 10, seed=42)

    def test_never_takes_zero_probability_steps(self):
        mdp = random_instance(5, 3, 2, sparsity=0.6)
        pol = RandomizedPolicy(np.full((5, 3), 1 / 3))
        states, actions = sample_paths(mdp, pol, 8, 2000, seed=0)
        steps = mdp.transition[states[:, :-1], actions, states[:, 1:]]
        assert np.all(steps > 0)


class TestPolicyEnumeration:
    @pytest.mark.parametrize("S,A,count", [(2, 2, 4), (1, 3, 3), (3, 2, 8)])
    def test_counts(self, S, A, count):
        mdp = random_instance(S, A, 0)
        pols = list(enumerate_deterministic_policies(mdp))
        assert len(pols) == count
        assert len(set(pols)) == count
        assert [p.actions for p in pols] == list(itertools.product(range(A), repeat=S))

    def test_cap(self):
        mdp = random_instance(10, 4, 0)
        with pytest.raises(CapExceededError):
            next(enumerate_deterministic_policies(mdp))


class TestTruncationHorizon:
    @pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9, 0.99])
    def test_tail_below_bound(self, gamma):
        H = truncation_horizon(gamma, 1e-6)
        assert gamma**H < 1e-6
        assert gamma ** (H - 1) >= 1e-6 or H == 1
