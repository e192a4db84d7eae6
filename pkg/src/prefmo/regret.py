"""Ideal point, Chebyshev-optimal policies and minimax regret.

Policies are optimised over the occupancy polytope

    sum_a x(s', a) - gamma * sum_{s, a} T(s, a, s') x(s, a) = mu(s'),  x >= 0,

whose points correspond one-to-one to randomized stationary policies, and on
which the aggregated vector value is the linear map ``sum_{s,a} x(s, a) R(s, a)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from prefmo.errors import NumericalError, ValidationError
from prefmo.lp import LinearProgram, solve_lp
from prefmo.mdp import (
    DEFAULT_POLICY_CAP,
    DeterministicPolicy,
    MdpInstance,
    Policy,
    RandomizedPolicy,
    ScalarReward,
    _start_distribution,
    policy_matrix,
    value_iteration,
)
from prefmo.momdp import aggregate, deterministic_values, vector_evaluate

IDEAL_TOL = 1e-12
REGIONS = ("simplex", "hypercube")


@dataclass(frozen=True, eq=False)
class IdealPoint:
    """Best achievable aggregated value per objective, with a policy attaining it."""

    values: NDArray
    policies: tuple[DeterministicPolicy, ...]


@dataclass(frozen=True, eq=False)
class ChebyshevSolution:
    """Optimum of a regret LP over the occupancy polytope.

    Attributes:
        regret: optimal objective value ``z*``.
        occupancy: ``x(s, a)``, shape ``(S, A)``.
        policy: randomized stationary policy induced by ``occupancy``.
        value: aggregated vector value ``sum x(s, a) R(s, a)``.
        active: objectives (or regret vertices) whose constraint is tight.
        ideal: the ideal point used by the program.
    """

    regret: float
    occupancy: NDArray
    policy: RandomizedPolicy
    value: NDArray
    active: tuple[int, ...]
    ideal: IdealPoint


def ideal_point(mdp: MdpInstance, start: int | None = None, tol: float = IDEAL_TOL) -> IdealPoint:
    """Solve one scalar MDP per objective with value iteration and aggregate."""
    R = mdp.vector_rewards()
    values, policies = [], []
    for i in range(R.shape[2]):
        v, pol = value_iteration(mdp.with_reward(ScalarReward(R[:, :, i])), tol)
        values.append(float(aggregate(mdp, v, start)))
        policies.append(pol)
    return IdealPoint(np.array(values), tuple(policies))


def policy_to_occupancy(mdp: MdpInstance, policy: Policy, start: int | None = None) -> NDArray:
    """Discounted state-action visitation ``x(s, a)`` of a stationary policy."""
    pm = policy_matrix(mdp, policy)
    P = np.einsum("sa,sat->st", pm, mdp.transition)
    mu = _start_distribution(mdp, start)
    d = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P.T, mu)
    return d[:, None] * pm


def occupancy_to_policy(occupancy: NDArray, atol: float = 1e-12) -> RandomizedPolicy:
    """``pi(s, a) = x(s, a) / sum_a' x(s, a')``, uniform on unvisited states."""
    x = np.clip(np.asarray(occupancy, dtype=float), 0.0, None)
    mass = x.sum(axis=1, keepdims=True)
    A = x.shape[1]
    probs = np.where(mass > atol, x / np.where(mass > atol, mass, 1.0), 1.0 / A)
    return RandomizedPolicy(probs / probs.sum(axis=1, keepdims=True))


def flow_residual(mdp: MdpInstance, occupancy: NDArray, start: int | None = None) -> float:
    """Largest violation of flow conservation (the total-mass check follows from it)."""
    x = np.asarray(occupancy, dtype=float)
    mu = _start_distribution(mdp, start)
    inflow = mdp.gamma * np.einsum("sa,sat->t", x, mdp.transition)
    return float(np.abs(x.sum(axis=1) - inflow - mu).max())


def _regret_lp(mdp: MdpInstance, weights: NDArray, targets: NDArray, start: int | None) -> LinearProgram:
    """``min z`` s.t. ``z >= targets_k - sum x(s, a) (weights_k . R(s, a))`` and flow constraints.

    Variables are the ``S * A`` occupancies followed by ``z``.
    """
    R = mdp.vector_rewards()
    S, A = mdp.n_states, mdp.n_actions
    n = S * A
    mu = _start_distribution(mdp, start)
    rows, senses, rhs = [], [], []
    gains = np.einsum("sad,kd->ksa", R, weights).reshape(len(weights), n)
    for k in range(len(weights)):
        rows.append(np.append(gains[k], 1.0))
        senses.append(">=")
        rhs.append(targets[k])
    for t in range(S):
        row = -mdp.gamma * mdp.transition[:, :, t].reshape(n)
        row[t * A : (t + 1) * A] += 1.0
        rows.append(np.append(row, 0.0))
        senses.append("=")
        rhs.append(mu[t])
    objective = np.zeros(n + 1)
    objective[-1] = 1.0
    bounds = tuple([(0.0, None)] * n + [(None, None)])
    return LinearProgram(objective, np.array(rows), tuple(senses), np.array(rhs), bounds)


def _solve_regret(mdp, weights, targets, start, ideal) -> ChebyshevSolution:
    sol = solve_lp(_regret_lp(mdp, weights, targets, start))
    if not sol.ok:
        raise NumericalError(f"regret LP ended with status {sol.status}: {sol.message}")
    S, A = mdp.n_states, mdp.n_actions
    occ = np.clip(sol.x[:-1].reshape(S, A), 0.0, None)
    z = float(sol.x[-1])
    value = np.einsum("sa,sad->d", occ, mdp.vector_rewards())
    gaps = targets - weights @ value
    active = tuple(int(k) for k in np.flatnonzero(gaps >= z - 1e-9))
    return ChebyshevSolution(z, occ, occupancy_to_policy(occ), value, active, ideal)


def chebyshev_optimal(mdp: MdpInstance, start: int | None = None, ideal: IdealPoint | None = None) -> ChebyshevSolution:
    """Randomized policy minimising ``max_i (I_i - aggregated value_i)``."""
    ideal = ideal or ideal_point(mdp, start)
    d = mdp.vector_rewards().shape[2]
    return _solve_regret(mdp, np.eye(d), ideal.values, start, ideal)


def region_vertices(d: int, region: str = "simplex") -> NDArray:
    """Vertices of the admissible difference-weight region.

    ``simplex`` is ``{w >= 0, sum w <= 1}`` (the origin and the canonical
    vectors); ``hypercube`` is ``[0, 1]^d``.
    """
    if region == "simplex":
        return np.vstack([np.zeros(d), np.eye(d)])
    if region == "hypercube":
        return np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    raise ValidationError(f"region must be one of {REGIONS}, got {region!r}")


def minimax_regret(
    mdp: MdpInstance, start: int | None = None, region: str = "simplex"
) -> tuple[float, ChebyshevSolution]:
    """Minimax-regret randomized policy over the weight region.

    The inner maximisation over weights is convex in the weights, so it is
    attained at a vertex of the region; for each vertex the adversary's best
    value comes from value iteration on the weighted scalar reward.
    """
    R = mdp.vector_rewards()
    verts = region_vertices(R.shape[2], region)
    best = np.empty(len(verts))
    for k, w in enumerate(verts):
        v, _ = value_iteration(mdp.with_reward(ScalarReward(R @ w)), IDEAL_TOL)
        best[k] = float(aggregate(mdp, v, start))
    sol = _solve_regret(mdp, verts, best, start, ideal_point(mdp, start))
    return sol.regret, sol


def chebyshev_value(ideal: NDArray, value: NDArray) -> NDArray:
    """``max_i (ideal_i - value_i)`` along the last axis."""
    return np.max(np.asarray(ideal)[..., :] - np.asarray(value), axis=-1)


def regret_value(value: NDArray, alternatives: NDArray, vertices: NDArray) -> NDArray:
    """``max_w [max_alt w . alt - w . value]`` with ``w`` ranging over ``vertices``."""
    best = (np.asarray(alternatives) @ vertices.T).max(axis=0)  # per vertex
    return np.max(best - np.asarray(value) @ vertices.T, axis=-1)


@dataclass(frozen=True)
class Lemma3Report:
    chebyshev_lp: float
    regret_lp: float
    lp_gap: float
    max_objective_gap: float
    argmin_equal: bool
    lp_not_worse: bool
    n_policies: int

    @property
    def passed(self) -> bool:
        return self.lp_gap <= 1e-8 and self.max_objective_gap <= 1e-8 and self.argmin_equal and self.lp_not_worse


def verify_lemma3(
    mdp: MdpInstance, start: int | None = None, cap: int = DEFAULT_POLICY_CAP, atol: float = 1e-8
) -> Lemma3Report:
    """Check that Chebyshev distance to the ideal point and simplex regret coincide.

    Over every deterministic policy plus the LP optimum, both objectives are
    evaluated independently: the Chebyshev one against the value-iteration
    ideal point, the regret one against the best enumerated alternative at
    each vertex of the weight simplex. Their argmin sets and optimal values
    must agree, and the LP optimum must not lose to any enumerated policy.
    """
    cheb = chebyshev_optimal(mdp, start)
    z_regret, _ = minimax_regret(mdp, start, "simplex")
    policies, vecs = deterministic_values(mdp, start, cap, tol=IDEAL_TOL)
    lp_vec = aggregate(mdp, vector_evaluate(mdp, cheb.policy, IDEAL_TOL), start)
    all_vecs = np.vstack([vecs, lp_vec])
    c_obj = chebyshev_value(cheb.ideal.values, all_vecs)
    r_obj = regret_value(all_vecs, all_vecs, region_vertices(all_vecs.shape[1], "simplex"))
    c_arg = set(np.flatnonzero(c_obj <= c_obj.min() + atol).tolist())
    r_arg = set(np.flatnonzero(r_obj <= r_obj.min() + atol).tolist())
    return Lemma3Report(
        chebyshev_lp=cheb.regret,
        regret_lp=z_regret,
        lp_gap=abs(cheb.regret - z_regret),
        max_objective_gap=float(np.abs(c_obj - r_obj).max()),
        argmin_equal=c_arg == r_arg,
        lp_not_worse=bool(cheb.regret <= c_obj[:-1].min() + atol),
        n_policies=len(policies),
    )
