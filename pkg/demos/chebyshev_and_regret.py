"""Compromise policies: Chebyshev distance to the ideal point and minimax regret.

With two objectives and one state, the best deterministic policies are
the two corners. A randomized policy found by linear programming over
occupancy measures halves the worst shortfall, and minimising the
maximum regret over the weight simplex gives the same answer.

Run with ``python demos/chebyshev_and_regret.py``.
"""

from __future__ import annotations

import numpy as np

from prefmo.fixtures import symmetric_instance
from prefmo.mdp import random_instance
from prefmo.momdp import deterministic_values
from prefmo.regret import chebyshev_optimal, chebyshev_value, ideal_point, minimax_regret, verify_lemma3

np.set_printoptions(precision=4, suppress=True)

# %% The symmetric example
mdp = symmetric_instance()
ideal = ideal_point(mdp)
print("ideal point:", ideal.values)
pols, vecs = deterministic_values(mdp)
for pol, v in zip(pols, vecs):
    print(f"  deterministic {pol.actions}: value {v}, Chebyshev distance {chebyshev_value(ideal.values, v):.3f}")
sol = chebyshev_optimal(mdp)
print("LP optimum: regret", round(sol.regret, 12), "policy", sol.policy.probs[0], "active", sol.active)

# %% Minimax regret over two weight regions
for region in ("simplex", "hypercube"):
    regret, _ = minimax_regret(mdp, region=region)
    print(f"minimax regret over the {region}: {regret:.4f}")

# %% The two objectives agree on random instances
for seed in range(5):
    rep = verify_lemma3(random_instance(3, 2, seed, gamma=0.7, reward="vector", dim=3))
    print(f"seed {seed}: LP gap {rep.lp_gap:.1e}, policy gap {rep.max_objective_gap:.1e}, passed {rep.passed}")
