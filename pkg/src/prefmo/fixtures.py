"""Small hand-built instances with known answers, shared by tests, demos and the self-test."""

from __future__ import annotations

import numpy as np

from prefmo.mdp import (
    DeterministicPolicy,
    MdpInstance,
    ScalarReward,
    SymbolicReward,
    VectorReward,
)

DICE = ((2, 4, 9), (1, 6, 8), (3, 5, 7))
DICE_HORIZON = 2


def dice_instance(gamma: float = 0.5) -> MdpInstance:
    """Intransitive dice as an MDP.

    From ``roll`` action ``k`` moves uniformly to one of the faces of die
    ``k``; a face state pays its face value and moves to an absorbing
    ``sink``. The history value after two steps is ``gamma * face``, so
    duels between the three roll policies reproduce the dice duels.
    """
    S, A = 11, 3
    roll, sink = 0, 10
    T = np.zeros((S, A, S))
    for k, faces in enumerate(DICE):
        T[roll, k, list(faces)] = 1.0 / 3.0
    T[1:, :, sink] = 1.0
    R = np.zeros((S, A))
    R[1:10, :] = np.arange(1, 10)[:, None]
    names = ("roll",) + tuple(f"face{i}" for i in range(1, 10)) + ("sink",)
    return MdpInstance(
        T, gamma, ScalarReward(R), np.full(S, 1.0 / S), names, ("die_a", "die_b", "die_c")
    )


def dice_policies() -> list[DeterministicPolicy]:
    """Roll die ``k`` (the action elsewhere is irrelevant)."""
    return [DeterministicPolicy((k,) + (0,) * 10) for k in range(3)]


def one_state_instance(reward: float = 1.0, gamma: float = 0.5) -> MdpInstance:
    """One state, one action, constant reward; its value is ``reward / (1 - gamma)``."""
    return MdpInstance(np.ones((1, 1, 1)), gamma, ScalarReward([[reward]]), [1.0])


def symmetric_instance() -> MdpInstance:
    """One state, two actions with vector rewards ``(1, 0)`` and ``(0, 1)``, ``gamma = 0``.

    The Chebyshev-optimal randomized policy splits evenly and has regret 0.5.
    """
    return MdpInstance(np.ones((1, 2, 1)), 0.0, VectorReward([[[1.0, 0.0], [0.0, 1.0]]]), [1.0])


def level_divergence_instance() -> MdpInstance:
    """Two equally likely outcomes with history values ``(1, 0)`` and ``(0, 1)``.

    ``start`` moves to ``left`` or ``right`` with probability 1/2; those pay
    ``(2, 0)`` and ``(0, 2)`` and lead to an absorbing zero-reward ``sink``.
    With ``gamma = 0.5`` and horizon 2 from ``start``, the max-component
    scalarizer gives 1.0 at the history level and 0.5 at the value level.
    """
    T = np.zeros((4, 1, 4))
    T[0, 0, [1, 2]] = 0.5
    T[1:, 0, 3] = 1.0
    R = np.zeros((4, 1, 2))
    R[1, 0] = (2.0, 0.0)
    R[2, 0] = (0.0, 2.0)
    return MdpInstance(T, 0.5, VectorReward(R), np.full(4, 0.25), ("start", "left", "right", "sink"))


LEVEL_DIVERGENCE_HORIZON = 2


def decreasing_order_counterexample() -> tuple[MdpInstance, np.ndarray]:
    """Symbolic instance where the ordered-rewards transform is unsound under decreasing values.

    One state, two actions labelled 0 and 1; after the transform action 1
    (reward vector ``(1, 1)``) Pareto-dominates action 0 (``(1, 0)``). With
    ``x = (1, 0)``, i.e. label 0 worth more than label 1, action 0 is
    strictly better, so the dominance check must fail.
    """
    pbmdp = MdpInstance(np.ones((1, 2, 1)), 0.5, SymbolicReward([[0, 1]], 2), [1.0])
    return pbmdp, np.array([1.0, 0.0])
