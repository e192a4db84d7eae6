"""Finding a preferred policy by asking pairwise questions.

A simulated user holds hidden weights over the objectives. The loop
keeps an epsilon-cover of the Pareto frontier as candidates, asks the
user to compare the two candidates that disagree most over the weights
still consistent with past answers, and cuts the weight region with
each answer.

Run with ``python demos/elicitation.py``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from prefmo.elicitation import SimulatedOracle, elicit_loop
from prefmo.io import load_instance, load_oracle
from prefmo.mdp import random_instance
from prefmo.momdp import deterministic_values
from prefmo.transforms import ordered_reward_transform

DATA = Path(__file__).resolve().parent.parent / "data"
np.set_printoptions(precision=4, suppress=True)

# %% A random two-objective instance
mdp = random_instance(3, 3, 2, gamma=0.7, reward="vector", dim=2)
oracle = SimulatedOracle([0.35, 0.65])
res = elicit_loop(mdp, 0.05, oracle)
print(f"cover size {len(res.cover_policies)}, queries asked {res.n_queries}")
for q, a in zip(res.queries, res.answers):
    print(f"  {q.u} vs {q.v}: user prefers {'first' if a else 'second'}")
_, vecs = deterministic_values(mdp)
print("recommended value under hidden weights:", round(float(res.value @ oracle.weights), 4))
print("best possible:", round(float((vecs @ oracle.weights).max()), 4))
print("weight region centroid:", res.polytope.centroid())

# %% Ordered labels on the corridor, with hidden label values
corridor = load_instance(DATA / "corridor_ordered_rewards.json")
truth = load_oracle(DATA / "corridor_oracle.json")
vec = ordered_reward_transform(corridor.mdp, corridor.preference.order)
res = elicit_loop(vec, 0.05, SimulatedOracle.from_reward_values(truth.true_values))
names = corridor.mdp.action_names
print("corridor recommendation:", [names[a] for a in res.policy.actions], "after", res.n_queries, "queries")
