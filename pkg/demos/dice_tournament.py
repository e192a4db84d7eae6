"""Intransitive dice as policies: duels, voting rules and a mixed strategy.

Three roll policies each move to a face of their die. Comparing the
two-step histories by value gives the classic cycle in which every die
beats the next with probability 5/9, so no policy wins outright and the
optimal mixed strategy plays all three evenly.

Run with ``python demos/dice_tournament.py``.
"""

from __future__ import annotations

import numpy as np

from prefmo.fixtures import DICE, DICE_HORIZON, dice_instance, dice_policies
from prefmo.pbmdp import (
    borda_scores,
    build_tournament,
    condorcet_winner,
    copeland_scores,
    detect_cycles,
    duel_exact,
    duel_monte_carlo,
    optimal_mixed_policy,
    utility_preference,
)

# %% The instance
mdp = dice_instance()
policies = dice_policies()
pref = utility_preference(mdp)
roll = mdp.state_names.index("roll")
print("dice faces:", DICE)

# %% One duel, exactly and by sampling
exact = duel_exact(mdp, policies[0], policies[1], pref, DICE_HORIZON, start=roll)
print(f"die_a vs die_b exact: p={exact.p:.4f} q={exact.q:.4f} (5/9 = {5 / 9:.4f})")
mc = duel_monte_carlo(mdp, policies[0], policies[1], pref, DICE_HORIZON, n=20_000, seed=1, start=roll)
se = np.sqrt(mc.p * (1 - mc.p) / mc.n)
print(f"die_a vs die_b sampled: p={mc.p:.4f} +/- {se:.4f}")

# %% The full tournament
t = build_tournament(mdp, policies, pref, DICE_HORIZON, start=roll)
np.set_printoptions(precision=4, suppress=True)
print("P[row beats col]:\n", t.p)
print("Condorcet winner:", condorcet_winner(t))
print("Copeland scores:", copeland_scores(t))
print("Borda scores:", borda_scores(t))
print("cycles:", detect_cycles(t))

# %% The game-theoretic answer
mixed = optimal_mixed_policy(t)
print("optimal mixed strategy:", mixed.weights, "game value:", round(mixed.value, 12))
