"""From ordered labels to vector rewards.

A corridor instance has symbolic rewards whose only known structure is
an order. Counting discounted label occurrences, then taking the
decumulative sum, gives a vector-reward instance whose weighted value
reproduces the scalar value under any increasing assignment of numbers
to labels. The same works when the user instead orders a few histories.

Run with ``python demos/transforms_and_lemmas.py``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from prefmo.fixtures import decreasing_order_counterexample
from prefmo.io import load_instance
from prefmo.mdp import DeterministicPolicy, random_instance
from prefmo.momdp import pareto_frontier
from prefmo.transforms import (
    RewardOrder,
    decumulative,
    dominance_soundness_check,
    history_basis_matrix,
    ordered_history_transform,
    ordered_reward_transform,
    random_ordered_histories,
    sample_increasing,
    verify_lemma1,
    verify_lemma2,
)

DATA = Path(__file__).resolve().parent.parent / "data"

# %% Decumulative sums turn counts into "at least this good" tallies
print("decumulative([1, 2, 3]) =", decumulative([1, 2, 3]))

# %% Ordered rewards on the corridor
corridor = load_instance(DATA / "corridor_ordered_rewards.json")
vec = ordered_reward_transform(corridor.mdp, corridor.preference.order)
front = pareto_frontier(vec)
print(f"corridor: {len(front)} Pareto-optimal deterministic policies after the transform")
for pol, v in front:
    print("  ", [corridor.mdp.action_names[a] for a in pol.actions], np.round(v, 4))

# %% Value reconstruction on random instances
rng = np.random.default_rng(0)
worst = 0.0
for seed in range(20):
    pb = random_instance(4, 3, seed, gamma=0.8, reward="symbolic", dim=3)
    order = RewardOrder(tuple(rng.permutation(3).tolist()))
    x = np.empty(3)
    x[list(order.ascending)] = sample_increasing(3, 1, rng)[0]
    pol = DeterministicPolicy(tuple(rng.integers(0, 3, 4).tolist()))
    worst = max(worst, verify_lemma1(pb, order, x, pol))
print(f"ordered rewards: worst reconstruction error {worst:.2e}")

# %% Ordered histories instead of ordered labels
pb = random_instance(3, 2, 5, gamma=0.7, reward="symbolic", dim=3)
hists, basis = random_ordered_histories(pb, rng)
print(f"history basis condition number {basis.condition:.1f}")
r = np.sort(rng.uniform(0, 5, 3))
x = basis.reward_values(r)
pol = DeterministicPolicy((0, 1, 0))
print(f"ordered histories: reconstruction error {verify_lemma2(pb, hists, x, pol, basis=basis):.2e}")
transformed = ordered_history_transform(pb, hists, history_basis_matrix(pb, hists))
print("transformed reward of (s0, a0):", np.round(transformed.vector_rewards()[0, 0], 4))

# %% Soundness, and what breaks it
report = dominance_soundness_check(pb, ordered_reward_transform(pb), n=50, seed=0)
print("soundness with increasing values:", report.passed, f"({report.pairs_checked} pairs)")
bad, x_bad = decreasing_order_counterexample()
report = dominance_soundness_check(bad, ordered_reward_transform(bad), true_values=x_bad)
print("soundness with decreasing values:", report.passed, report.counterexample)
