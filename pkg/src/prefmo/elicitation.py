"""Comparison-query elicitation of unknown reward weights over an epsilon-cover.

The admissible region is a polytope of weight vectors ``w`` (difference
weights for transformed instances), initially the simplex
``{w >= 0, sum w = 1}``. Each answered query ``u`` vs ``v`` adds the cut
``w . (u - v) >= 0`` in favour of the preferred vector. Candidates are the
cover elements not yet shown to be weakly beaten everywhere in the region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from prefmo.errors import InconsistentOracleError, NumericalError, ValidationError
from prefmo.lp import INFEASIBLE, LinearProgram, solve_lp
from prefmo.mdp import DEFAULT_POLICY_CAP, DeterministicPolicy, MdpInstance
from prefmo.momdp import epsilon_cover_indices, pareto_frontier
from prefmo.transforms import BasisMatrix, difference_weights

DISAGREE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class WeightPolytope:
    """``{w >= 0, sum w = 1, cuts @ w >= 0}``."""

    dim: int
    cuts: NDArray = field(default=None)

    def __post_init__(self):
        cuts = np.zeros((0, self.dim)) if self.cuts is None else np.asarray(self.cuts, dtype=float).reshape(-1, self.dim)
        cuts.setflags(write=False)
        object.__setattr__(self, "cuts", cuts)

    def _lp(self, objective: NDArray, maximize: bool) -> LinearProgram:
        A = np.vstack([self.cuts, np.ones((1, self.dim))])
        senses = (">=",) * len(self.cuts) + ("=",)
        rhs = np.append(np.zeros(len(self.cuts)), 1.0)
        return LinearProgram(np.asarray(objective, float), A, senses, rhs, maximize=maximize)

    def maximize(self, direction: ArrayLike) -> tuple[float, NDArray]:
        """``max_w w . direction`` over the polytope and a maximiser."""
        sol = solve_lp(self._lp(np.asarray(direction, float), True))
        if sol.status == INFEASIBLE:
            raise InconsistentOracleError("admissible weight region is empty")
        if not sol.ok:
            raise NumericalError(f"weight LP ended with status {sol.status}")
        return sol.objective, sol.x

    def is_feasible(self) -> bool:
        sol = solve_lp(self._lp(np.zeros(self.dim), False))
        if sol.status == INFEASIBLE:
            return False
        if not sol.ok:
            raise NumericalError(f"weight LP ended with status {sol.status}")
        return True

    def contains(self, w: ArrayLike, atol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float)
        return bool(
            np.all(w >= -atol) and abs(w.sum() - 1.0) <= atol and np.all(self.cuts @ w >= -atol)
        )

    def centroid(self) -> NDArray:
        """Average of the maximisers of each coordinate: a point inside the region."""
        pts = [self.maximize(e)[1] for e in np.eye(self.dim)]
        return np.mean(pts, axis=0)


@dataclass(frozen=True, eq=False)
class Query:
    first: int
    second: int
    u: NDArray
    v: NDArray

    def __post_init__(self):
        if np.array_equal(self.u, self.v):
            raise ValidationError("query compares a vector with itself")


def update_polytope(polytope: WeightPolytope, query: Query, prefers_first: bool) -> WeightPolytope:
    """Add the cut ``w . (winner - loser) >= 0``.

    Raises:
        InconsistentOracleError: if the region becomes empty.
    """
    diff = query.u - query.v if prefers_first else query.v - query.u
    new = WeightPolytope(polytope.dim, np.vstack([polytope.cuts, diff]))
    if not new.is_feasible():
        raise InconsistentOracleError("answer contradicts earlier answers")
    return new


@dataclass(frozen=True, eq=False)
class SimulatedOracle:
    """Answers comparisons with hidden weights ``w*`` (deterministic, noise-free)."""

    weights: NDArray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or w.sum() <= 0:
            raise ValidationError("oracle weights must be nonnegative and not all zero")
        object.__setattr__(self, "weights", w / w.sum())

    @classmethod
    def from_reward_values(cls, true_values: ArrayLike, basis: BasisMatrix | None = None) -> "SimulatedOracle":
        """Oracle for a transformed instance from hidden increasing reward values.

        Without ``basis`` the values are the canonical ``x_1 < ... < x_d`` and
        must be nonnegative; with ``basis`` they are label values whose
        history values ``H^T x`` must be nonnegative and increasing.
        """
        x = np.asarray(true_values, dtype=float)
        r = basis.history_values(x) if basis is not None else x
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ValidationError("hidden values must be nonnegative and strictly increasing")
        return cls(difference_weights(r))

    def prefers_first(self, query: Query) -> bool:
        return bool(self.weights @ query.u >= self.weights @ query.v)


@dataclass(frozen=True, eq=False)
class ElicitationResult:
    policy: DeterministicPolicy
    value: NDArray
    polytope: WeightPolytope
    queries: tuple[Query, ...]
    answers: tuple[bool, ...]
    cover_policies: tuple[DeterministicPolicy, ...]
    cover_vectors: NDArray
    candidate_history: tuple[tuple[int, ...], ...]

    @property
    def n_queries(self) -> int:
        return len(self.queries)


def _prune(cands: list[int], vecs: NDArray, poly: WeightPolytope) -> list[int]:
    """Drop candidates weakly beaten by another candidate over the whole region."""
    alive = list(cands)
    for j in list(alive):
        for i in alive:
            if i == j:
                continue
            gain, _ = poly.maximize(vecs[j] - vecs[i])
            # j never strictly better than i; on exact ties keep the lower index
            if gain <= DISAGREE_TOL and (i < j or poly.maximize(vecs[i] - vecs[j])[0] > DISAGREE_TOL):
                alive.remove(j)
                break
    return alive


def _max_regret(k: int, cands: list[int], vecs: NDArray, poly: WeightPolytope) -> float:
    return max((poly.maximize(vecs[j] - vecs[k])[0] for j in cands if j != k), default=0.0)


def elicit_loop(
    mdp: MdpInstance,
    epsilon: float,
    oracle: SimulatedOracle,
    max_queries: int | None = None,
    start: int | None = None,
    cap: int = DEFAULT_POLICY_CAP,
) -> ElicitationResult:
    """Query the oracle over an epsilon-cover of the Pareto frontier until one candidate is left.

    The cover is taken of the frontier vectors translated by the frontier's
    componentwise minimum, so the recommendation is within
    ``epsilon * max_i (ideal_i - nadir_i)`` of the oracle's best policy.

    Each round asks about the candidate pair with the largest two-sided
    disagreement ``min(max_w w.(u - v), max_w w.(v - u))`` over the current
    region. The loser of every answer leaves the candidate set, so at most
    ``|cover| - 1`` queries are asked. The recommendation is the candidate
    with the smallest maximum regret over the final region, ties broken by
    value at the region's centroid.
    """
    frontier = pareto_frontier(mdp, start, cap)
    if len(frontier) == 0:
        raise ValidationError("empty frontier")
    # cover the frontier relative to its nadir so that epsilon scales with the
    # ideal-nadir range instead of absolute values (components that are
    # constant across policies then drop out)
    nadir = frontier.vectors.min(axis=0)
    idx = epsilon_cover_indices(frontier.vectors - nadir, epsilon)
    vecs = frontier.vectors[idx]
    pols = tuple(frontier.policies[i] for i in idx)
    d = vecs.shape[1]
    if oracle.weights.shape != (d,):
        raise ValidationError(f"oracle has {len(oracle.weights)} weights, instance has {d} objectives")
    poly = WeightPolytope(d)
    cands = _prune(list(range(len(vecs))), vecs, poly)
    history = [tuple(cands)]
    queries: list[Query] = []
    answers: list[bool] = []
    limit = len(vecs) if max_queries is None else max_queries
    while len(cands) > 1 and len(queries) < limit:
        best, pair = -np.inf, None
        for a in range(len(cands)):
            for b in range(a + 1, len(cands)):
                i, j = cands[a], cands[b]
                score = min(poly.maximize(vecs[i] - vecs[j])[0], poly.maximize(vecs[j] - vecs[i])[0])
                if score > best + 1e-15:
                    best, pair = score, (i, j)
        if pair is None or best <= DISAGREE_TOL:
            break
        q = Query(pair[0], pair[1], vecs[pair[0]], vecs[pair[1]])
        ans = oracle.prefers_first(q)
        poly = update_polytope(poly, q, ans)
        queries.append(q)
        answers.append(ans)
        loser = pair[1] if ans else pair[0]
        cands = _prune([c for c in cands if c != loser], vecs, poly)
        history.append(tuple(cands))
    if len(cands) == 1:
        choice = cands[0]
    else:
        regrets = np.array([_max_regret(k, cands, vecs, poly) for k in cands])
        tied = [c for c, r in zip(cands, regrets) if r <= regrets.min() + DISAGREE_TOL]
        centre = poly.centroid()
        choice = max(tied, key=lambda c: (float(centre @ vecs[c]), -c))
    return ElicitationResult(
        pols[choice], vecs[choice], poly, tuple(queries), tuple(answers), pols, vecs, tuple(history)
    )
