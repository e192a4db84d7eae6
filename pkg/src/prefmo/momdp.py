"""Vector-reward evaluation, dominance relations, Pareto frontiers and epsilon-covers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import Bounds, LinearConstraint, milp

from prefmo.errors import DomainError, ValidationError
from prefmo.mdp import (
    DEFAULT_HISTORY_CAP,
    DEFAULT_POLICY_CAP,
    DEFAULT_TOL,
    DeterministicPolicy,
    MdpInstance,
    Policy,
    ScalarReward,
    _start_distribution,
    enumerate_deterministic_policies,
    enumerate_paths,
    evaluate_batch,
    evaluate_policy,
    path_rewards,
    policy_matrix,
)

LEVELS = ("reward", "history", "value")


def vector_evaluate(mdp: MdpInstance, policy: Policy, tol: float = DEFAULT_TOL) -> NDArray:
    """Vector value function, shape ``(S, d)``, iterated from the zero vector."""
    R = mdp.vector_rewards()
    return evaluate_batch(mdp.transition, mdp.gamma, R, policy_matrix(mdp, policy)[None], tol)[0]


def vector_evaluate_many(
    mdp: MdpInstance, policies: Sequence[Policy], tol: float = DEFAULT_TOL
) -> NDArray:
    """Evaluate several stationary policies at once; shape ``(B, S, d)``."""
    R = mdp.vector_rewards()
    if not policies:
        return np.zeros((0, mdp.n_states, R.shape[2]))
    pm = np.stack([policy_matrix(mdp, p) for p in policies])
    return evaluate_batch(mdp.transition, mdp.gamma, R, pm, tol)


def aggregate(mdp: MdpInstance, values: NDArray, start: int | None = None) -> NDArray:
    """``sum_s mu(s) v(s)`` over the state axis (second to last for vector values)."""
    w = _start_distribution(mdp, start)
    return np.tensordot(w, values, axes=([0], [-2])) if values.ndim >= 2 else w @ values


# --------------------------------------------------------------------------- dominance


def _pair(u: ArrayLike, v: ArrayLike) -> tuple[NDArray, NDArray]:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return u, v


def pareto_dominates(u: ArrayLike, v: ArrayLike, atol: float = 0.0) -> bool:
    """``u >= v`` componentwise with at least one strict improvement.

    Works on vectors and on ``(S, d)`` value functions alike; for the latter
    the comparison is joint over all states (no smaller anywhere, greater
    somewhere).
    """
    u, v = _pair(u, v)
    return bool(np.all(u >= v - atol) and np.any(u > v + atol))


def pareto_dominates_statewise(U: ArrayLike, V: ArrayLike, atol: float = 0.0) -> bool:
    """Dominance between two value functions of shape ``(S, d)``."""
    U, V = _pair(U, V)
    if U.ndim != 2:
        raise ValidationError("value functions must have shape (S, d)")
    return pareto_dominates(U, V, atol)


def lorenz_vector(u: ArrayLike) -> NDArray:
    """Prefix sums of the components sorted in non-decreasing order."""
    return np.cumsum(np.sort(np.asarray(u, dtype=float), axis=-1), axis=-1)


def lorenz_dominates(u: ArrayLike, v: ArrayLike, atol: float = 0.0) -> bool:
    u, v = _pair(u, v)
    return pareto_dominates(lorenz_vector(u), lorenz_vector(v), atol)


def nondominated_mask(points: ArrayLike, atol: float = 0.0) -> NDArray:
    """Boolean mask of points not Pareto-dominated by any other point."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        raise ValidationError("points must have shape (n, d)")
    geq = np.all(P[:, None, :] >= P[None, :, :] - atol, axis=2)
    gt = np.any(P[:, None, :] > P[None, :, :] + atol, axis=2)
    dominated_by = geq & gt  # [i, j]: i dominates j
    return ~dominated_by.any(axis=0)


@dataclass(frozen=True, eq=False)
class ParetoSet:
    """Mutually non-dominated ``(policy, mu-aggregated value vector)`` pairs."""

    policies: tuple[DeterministicPolicy, ...]
    vectors: NDArray

    def __len__(self) -> int:
        return len(self.policies)

    def __iter__(self):
        return iter(zip(self.policies, self.vectors))


FRONTIER_ATOL = 1e-10


def deterministic_values(
    mdp: MdpInstance, start: int | None = None, cap: int = DEFAULT_POLICY_CAP, tol: float = DEFAULT_TOL
) -> tuple[list[DeterministicPolicy], NDArray]:
    """All deterministic policies with their aggregated value vectors ``(n, d)``."""
    policies = list(enumerate_deterministic_policies(mdp, cap))
    values = vector_evaluate_many(mdp, policies, tol)
    return policies, aggregate(mdp, values, start)


def pareto_frontier(
    mdp: MdpInstance,
    start: int | None = None,
    cap: int = DEFAULT_POLICY_CAP,
    tol: float = DEFAULT_TOL,
    atol: float = FRONTIER_ATOL,
) -> ParetoSet:
    """Non-dominated deterministic stationary policies at the initial distribution.

    Entries are sorted lexicographically by value vector, then by action tuple.
    Dominance is decided with absolute slack ``atol`` so that equal values
    reached through different float paths do not knock each other out.
    """
    policies, vecs = deterministic_values(mdp, start, cap, tol)
    keep = np.flatnonzero(nondominated_mask(vecs, atol))
    order = sorted(keep, key=lambda i: (tuple(vecs[i]), policies[i].actions))
    return ParetoSet(tuple(policies[i] for i in order), vecs[order])


# --------------------------------------------------------------------------- epsilon covers


def _check_cover_input(points: ArrayLike) -> NDArray:
    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        raise ValidationError("points must have shape (n, d)")
    if np.any(P < 0):
        raise DomainError("epsilon-covers are only defined here for nonnegative vectors")
    return P


def _greedy_cover(P: NDArray, epsilon: float) -> list[int]:
    order = sorted(range(len(P)), key=lambda i: (tuple(-P[i]), i))
    chosen: list[int] = []
    scaled = np.empty((0, P.shape[1]))
    for i in order:
        if len(chosen) and np.any(np.all(scaled >= P[i], axis=1)):
            continue
        chosen.append(i)
        scaled = np.vstack([scaled, (1.0 + epsilon) * P[i]])
    return chosen


COVER_METHODS = ("minimum", "greedy")
COVER_NODE_LIMIT = 20_000


def _minimum_cover(P: NDArray, epsilon: float) -> list[int] | None:
    """Smallest cover by 0/1 set-cover programming, or None if not proved optimal.

    Candidates are restricted to distinct non-dominated points: any point
    can be swapped for a non-dominated point above it without losing coverage.
    """
    _, first = np.unique(P, axis=0, return_index=True)
    first = np.sort(first)
    cand = first[nondominated_mask(P[first])]
    if len(cand) == 1:
        return [int(cand[0])]
    Q = P[cand]
    A = np.all((1.0 + epsilon) * Q[None, :, :] >= Q[:, None, :], axis=2).astype(float)
    res = milp(
        np.ones(len(cand)),
        constraints=LinearConstraint(A, 1.0, np.inf),
        integrality=np.ones(len(cand)),
        bounds=Bounds(0.0, 1.0),
        options={"node_limit": COVER_NODE_LIMIT},
    )
    if res.status != 0:
        return None
    pick = cand[np.flatnonzero(res.x > 0.5)]
    return sorted(pick.tolist(), key=lambda i: (tuple(-P[i]), i))


def epsilon_cover_indices(points: ArrayLike, epsilon: float, method: str = "minimum") -> list[int]:
    """Epsilon-cover of ``points``; returns indices into ``points``.

    ``greedy`` scans points in non-increasing lexicographic order and keeps a
    point unless some already kept ``c`` satisfies ``(1 + epsilon) c >= p``.
    ``minimum`` (the default) returns a smallest cover, which makes the
    cover size non-increasing in ``epsilon``; if the exact program hits its
    node limit it falls back to the greedy scan. Indices come in
    non-increasing lexicographic order of their points.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if method not in COVER_METHODS:
        raise ValidationError(f"method must be one of {COVER_METHODS}, got {method!r}")
    P = _check_cover_input(points)
    if len(P) == 0:
        return []
    if method == "minimum":
        exact = _minimum_cover(P, epsilon)
        if exact is not None:
            return exact
    return _greedy_cover(P, epsilon)


def epsilon_cover(points: ArrayLike, epsilon: float, method: str = "minimum") -> NDArray:
    """Subset of ``points`` forming an epsilon-cover of them."""
    P = _check_cover_input(points)
    return P[epsilon_cover_indices(P, epsilon, method)]


def verify_cover(cover: ArrayLike, points: ArrayLike, epsilon: float) -> bool:
    """Exhaustively check ``for all p in points, exists c in cover: (1 + epsilon) c >= p``."""
    P = np.asarray(points, dtype=float)
    C = np.asarray(cover, dtype=float)
    if P.size == 0:
        return True
    if C.size == 0:
        return False
    P = P.reshape(len(P), -1)
    C = C.reshape(len(C), -1)
    if C.shape[1] != P.shape[1]:
        return False
    covered = np.all((1.0 + epsilon) * C[None, :, :] >= P[:, None, :], axis=2).any(axis=1)
    return bool(covered.all())


# --------------------------------------------------------------------------- scalarization


class Scalarizer:
    """Map from objective vectors (last axis) to scalars."""

    def __call__(self, v: ArrayLike) -> NDArray:
        raise NotImplementedError

    linear = False


@dataclass(frozen=True, eq=False)
class LinearScalarizer(Scalarizer):
    weights: NDArray
    linear = True

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValidationError("linear weights must be a finite vector")
        object.__setattr__(self, "weights", w)

    def __call__(self, v):
        return np.asarray(v, dtype=float) @ self.weights


@dataclass(frozen=True, eq=False)
class ChebyshevScalarizer(Scalarizer):
    """``-max_i (reference_i - v_i)``: larger is better, monotone in ``v``."""

    reference: NDArray

    def __post_init__(self):
        object.__setattr__(self, "reference", np.array(self.reference, dtype=float))

    def __call__(self, v):
        return -np.max(self.reference - np.asarray(v, dtype=float), axis=-1)


class MonotoneScalarizer(Scalarizer):
    """User-supplied function of one vector, checked for monotonicity on random pairs.

    Raises:
        ValidationError: if ``u >= v`` but ``f(u) < f(v)`` for a sampled pair.
    """

    def __init__(self, func: Callable[[NDArray], float], dim: int, n_checks: int = 1000, seed: int = 0, scale: float = 10.0):
        self.func = func
        self.dim = dim
        rng = np.random.default_rng(seed)
        v = rng.uniform(-scale, scale, size=(n_checks, dim))
        u = v + rng.uniform(0, scale, size=(n_checks, dim)) * (rng.random((n_checks, dim)) < 0.5)
        for a, b in zip(u, v):
            if func(a) < func(b) - 1e-12:
                raise ValidationError(f"scalarizing function is not monotone: f({a}) < f({b})")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            return float(self.func(v))
        return np.apply_along_axis(self.func, -1, v)


def max_component(dim: int) -> MonotoneScalarizer:
    """``f(v) = max_i v_i``, a monotone but nonlinear scalarizer."""
    return MonotoneScalarizer(lambda v: float(np.max(v)), dim=dim)


def scalarize(
    mdp: MdpInstance,
    f: Scalarizer,
    level: str,
    policy: Policy,
    horizon: int | None = None,
    start: int | None = None,
    tol: float = DEFAULT_TOL,
    cap: int = DEFAULT_HISTORY_CAP,
) -> float:
    """Scalar value of ``policy`` with ``f`` applied at one of three levels.

    * ``reward``: evaluate the scalar reward ``f(R(s, a))``;
    * ``history``: expectation of ``f`` applied to the vector value of each
      history of length ``horizon``;
    * ``value``: ``f`` applied to the aggregated vector value.

    Values are aggregated with the initial distribution, or taken at ``start``.
    """
    R = mdp.vector_rewards()
    if level == "reward":
        scalar = mdp.with_reward(ScalarReward(np.asarray(f(R), dtype=float)))
        return float(aggregate(mdp, evaluate_policy(scalar, policy, tol), start))
    if level == "history":
        if horizon is None:
            raise ValidationError("history-level scalarization needs a horizon")
        states, actions, probs = enumerate_paths(mdp, policy, horizon, start, cap)
        return float(probs @ np.asarray(f(path_rewards(mdp, states, actions, R)), dtype=float))
    if level == "value":
        return float(f(aggregate(mdp, vector_evaluate(mdp, policy, tol), start)))
    raise ValidationError(f"level must be one of {LEVELS}, got {level!r}")
