"""Preferences over histories, probabilistic dominance and tournament analytics.

Duels draw the two histories independently. ``p`` is the probability that
the first policy's history is preferred or equivalent to the second's, ``q``
the converse, so ties are counted on both sides and incomparable pairs on
neither (unless a preference maps incomparability to equivalence).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from prefmo.errors import CapExceededError, NumericalError, PrefmoError, ValidationError
from prefmo.lp import build_lp, solve_lp
from prefmo.mdp import (
    DEFAULT_HISTORY_CAP,
    DeterministicPolicy,
    History,
    MdpInstance,
    MixedPolicy,
    Policy,
    enumerate_paths,
    path_rewards,
    sample_paths,
)
from prefmo.momdp import Scalarizer

TIE_TOL = 1e-12
KEY_ATOL = 1e-12


class Comparison(enum.IntEnum):
    SECOND = -1
    EQUIVALENT = 0
    FIRST = 1
    INCOMPARABLE = 2


@dataclass(frozen=True, eq=False)
class HistoryPreference:
    """Comparator over histories.

    ``valuation`` and ``relation`` give an optional vectorised path used by
    the duel routines: ``valuation(states, actions)`` maps path arrays to
    keys, ``relation(k1, k2)`` maps broadcast key arrays to
    :class:`Comparison` codes.
    """

    compare: Callable[[History, History], Comparison]
    provenance: str = "user-supplied"
    valuation: Callable[[NDArray, NDArray], NDArray] | None = field(default=None, repr=False)
    relation: Callable[[NDArray, NDArray], NDArray] | None = field(default=None, repr=False)

    def __call__(self, h1: History, h2: History) -> Comparison:
        return Comparison(self.compare(h1, h2))

    def _codes(self, paths1, paths2) -> NDArray:
        if self.valuation is not None and self.relation is not None:
            k1 = self.valuation(*paths1)
            k2 = self.valuation(*paths2)
            return np.asarray(self.relation(k1[:, None], k2[None, :]), dtype=np.int64)
        h1 = [History(s, a) for s, a in zip(paths1[0].tolist(), paths1[1].tolist())]
        h2 = [History(s, a) for s, a in zip(paths2[0].tolist(), paths2[1].tolist())]
        try:
            return np.array([[int(self.compare(a, b)) for b in h2] for a in h1], dtype=np.int64).reshape(len(h1), len(h2))
        except PrefmoError:
            raise
        except Exception as exc:
            raise NumericalError(f"history comparator failed: {exc}") from exc

    def _paired_codes(self, paths1, paths2) -> NDArray:
        if self.valuation is not None and self.relation is not None:
            return np.asarray(self.relation(self.valuation(*paths1), self.valuation(*paths2)), dtype=np.int64)
        out = []
        for s1, a1, s2, a2 in zip(paths1[0].tolist(), paths1[1].tolist(), paths2[0].tolist(), paths2[1].tolist()):
            try:
                out.append(int(self.compare(History(s1, a1), History(s2, a2))))
            except PrefmoError:
                raise
            except Exception as exc:
                raise NumericalError(f"history comparator failed: {exc}") from exc
        return np.array(out, dtype=np.int64)


def _total_relation(k1: NDArray, k2: NDArray) -> NDArray:
    diff = k1 - k2
    scale = np.maximum(1.0, np.maximum(np.abs(k1), np.abs(k2)))
    return np.where(np.abs(diff) <= KEY_ATOL * scale, 0, np.sign(diff)).astype(np.int64)


def _keyed(mdp: MdpInstance, key: Callable[[NDArray, NDArray], NDArray], relation, provenance: str) -> HistoryPreference:
    def compare(h1: History, h2: History) -> Comparison:
        h1.validate(mdp)
        h2.validate(mdp)
        k1 = key(np.array([h1.states]), np.array([h1.actions], dtype=np.int64).reshape(1, -1))
        k2 = key(np.array([h2.states]), np.array([h2.actions], dtype=np.int64).reshape(1, -1))
        return Comparison(int(relation(k1, k2)[0]))

    return HistoryPreference(compare, provenance, key, relation)


def utility_preference(mdp: MdpInstance) -> HistoryPreference:
    """Total preference by discounted scalar reward of the histories."""
    R = mdp.scalar_rewards()
    return _keyed(mdp, lambda s, a: path_rewards(mdp, s, a, R), _total_relation, "utility-based")


def scalarized_preference(mdp: MdpInstance, f: Scalarizer) -> HistoryPreference:
    """Total preference by ``f`` applied to the vector value of each history."""
    R = mdp.vector_rewards()
    return _keyed(
        mdp, lambda s, a: np.asarray(f(path_rewards(mdp, s, a, R)), dtype=float), _total_relation, "scalarized"
    )


def pareto_preference(mdp: MdpInstance, incomparable_as_equivalent: bool = False) -> HistoryPreference:
    """Preference induced by Pareto dominance of history vector values.

    By default incomparable pairs count on neither side of a duel; with
    ``incomparable_as_equivalent`` they count on both.
    """
    R = mdp.vector_rewards()

    def relation(k1: NDArray, k2: NDArray) -> NDArray:
        k1, k2 = np.broadcast_arrays(k1, k2)
        scale = np.maximum(1.0, np.maximum(np.abs(k1), np.abs(k2)))
        geq = np.all(k1 >= k2 - KEY_ATOL * scale, axis=-1)
        leq = np.all(k1 <= k2 + KEY_ATOL * scale, axis=-1)
        out = np.where(geq & leq, 0, np.where(geq, 1, np.where(leq, -1, 2)))
        if incomparable_as_equivalent:
            out = np.where(out == 2, 0, out)
        return out

    return _keyed(mdp, lambda s, a: path_rewards(mdp, s, a, R), relation, "Pareto-induced")


def user_preference(compare: Callable[[History, History], Comparison]) -> HistoryPreference:
    return HistoryPreference(compare, "user-supplied")


# --------------------------------------------------------------------------- duels


@dataclass(frozen=True)
class DuelResult:
    p: float
    q: float
    method: str = "exact"
    horizon: int = 0
    n: int | None = None
    seed: int | None = None

    def swapped(self) -> "DuelResult":
        return DuelResult(self.q, self.p, self.method, self.horizon, self.n, self.seed)


def duel_exact(
    mdp: MdpInstance,
    policy: Policy,
    other: Policy,
    pref: HistoryPreference,
    horizon: int,
    start: int | None = None,
    cap: int = DEFAULT_HISTORY_CAP,
) -> DuelResult:
    """Exact ``(P[pi >~ pi'], P[pi' >~ pi])`` over independently drawn histories."""
    s1, a1, p1 = enumerate_paths(mdp, policy, horizon, start, cap)
    s2, a2, p2 = enumerate_paths(mdp, other, horizon, start, cap)
    if len(p1) * len(p2) > cap:
        raise CapExceededError(f"{len(p1)} x {len(p2)} history pairs exceed cap {cap}")
    codes = pref._codes((s1, a1), (s2, a2))
    first = ((codes == 1) | (codes == 0)).astype(float)
    second = ((codes == -1) | (codes == 0)).astype(float)
    return DuelResult(float(p1 @ first @ p2), float(p1 @ second @ p2), "exact", horizon)


def duel_monte_carlo(
    mdp: MdpInstance,
    policy: Policy,
    other: Policy,
    pref: HistoryPreference,
    horizon: int,
    n: int,
    seed: int = 0,
    start: int | None = None,
) -> DuelResult:
    """Unbiased estimate of :func:`duel_exact` from ``n`` independent history pairs."""
    if n < 1:
        raise ValidationError("need at least one sample")
    r1, r2 = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    paths1 = sample_paths(mdp, policy, horizon, n, r1, start)
    paths2 = sample_paths(mdp, other, horizon, n, r2, start)
    codes = pref._paired_codes(paths1, paths2)
    p = float(np.mean((codes == 1) | (codes == 0)))
    q = float(np.mean((codes == -1) | (codes == 0)))
    return DuelResult(p, q, "monte-carlo", horizon, n, seed)


def probabilistic_dominance(d: DuelResult, tol: float = TIE_TOL) -> str:
    """``"first"`` if p > q, ``"second"`` if q > p, ``"tie"`` within ``tol``."""
    if abs(d.p - d.q) <= tol:
        return "tie"
    return "first" if d.p > d.q else "second"


# --------------------------------------------------------------------------- tournaments


@dataclass(frozen=True, eq=False)
class Tournament:
    """All pairwise duels among a list of policies; ``duels[i][j]`` is i against j."""

    policies: tuple[Policy, ...]
    duels: tuple[tuple[DuelResult, ...], ...]

    def __post_init__(self):
        n = len(self.duels)
        if any(len(row) != n for row in self.duels):
            raise ValidationError("tournament must be square")

    def __len__(self) -> int:
        return len(self.duels)

    @property
    def p(self) -> NDArray:
        return np.array([[d.p for d in row] for row in self.duels]).reshape(len(self), len(self))

    @property
    def q(self) -> NDArray:
        return np.array([[d.q for d in row] for row in self.duels]).reshape(len(self), len(self))

    def payoff(self) -> NDArray:
        """Zero-sum payoff ``M[i, j] = p_ij - q_ij``."""
        return self.p - self.q

    @classmethod
    def from_matrix(cls, p: NDArray, policies: Sequence[Policy] = ()) -> "Tournament":
        """Tournament with ``q_ij = p_ji``, built from a probability matrix."""
        p = np.asarray(p, dtype=float)
        n = len(p)
        duels = tuple(tuple(DuelResult(float(p[i, j]), float(p[j, i])) for j in range(n)) for i in range(n))
        return cls(tuple(policies), duels)


def build_tournament(
    mdp: MdpInstance,
    policies: Sequence[Policy],
    pref: HistoryPreference,
    horizon: int,
    method: str = "exact",
    n: int = 10_000,
    seed: int = 0,
    start: int | None = None,
    cap: int = DEFAULT_HISTORY_CAP,
) -> Tournament:
    """Duel every ordered pair; ``duel(j, i)`` is the swap of ``duel(i, j)``."""
    k = len(policies)
    grid: list[list[DuelResult | None]] = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(i, k):
            if method == "exact":
                d = duel_exact(mdp, policies[i], policies[j], pref, horizon, start, cap)
            elif method == "mc":
                pair_seed = int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0])
                d = duel_monte_carlo(mdp, policies[i], policies[j], pref, horizon, n, pair_seed, start)
            else:
                raise ValidationError(f"unknown duel method {method!r}")
            if i == j:
                sym = 0.5 * (d.p + d.q) if method == "mc" else d.p
                d = DuelResult(sym, sym, d.method, d.horizon, d.n, d.seed)
            grid[i][j] = d
            grid[j][i] = d.swapped()
    return Tournament(tuple(policies), tuple(tuple(row) for row in grid))


def _outcomes(t: Tournament, tol: float) -> NDArray:
    """``+1`` where i beats j, ``-1`` where j beats i, 0 for ties and the diagonal."""
    diff = t.p - t.q
    out = np.where(diff > tol, 1, np.where(diff < -tol, -1, 0))
    np.fill_diagonal(out, 0)
    return out


def condorcet_winner(t: Tournament, tol: float = TIE_TOL) -> int | None:
    """Lowest index whose every off-diagonal duel is won or tied, or ``None``."""
    out = _outcomes(t, tol)
    for i in range(len(t)):
        if np.all(out[i] >= 0):
            return i
    return None


def copeland_scores(t: Tournament, tol: float = TIE_TOL) -> NDArray:
    return _outcomes(t, tol).sum(axis=1)


def copeland_winner(t: Tournament, tol: float = TIE_TOL) -> int:
    """Index maximising wins minus losses (lowest index on ties)."""
    return int(np.argmax(copeland_scores(t, tol)))


def borda_scores(t: Tournament) -> NDArray:
    """``sum_{j != i} p_ij``."""
    p = t.p.copy()
    np.fill_diagonal(p, 0.0)
    return p.sum(axis=1)


def borda_winner(t: Tournament, tol: float = TIE_TOL) -> int:
    s = borda_scores(t)
    return int(np.flatnonzero(s >= s.max() - tol)[0])


def detect_cycles(t: Tournament, tol: float = TIE_TOL) -> list[tuple[int, int, int]]:
    """Strict 3-cycles ``i > j > k > i``, each reported once starting at its smallest index."""
    beats = _outcomes(t, tol) > 0
    n = len(t)
    cycles = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(i + 1, n):
                if k != j and beats[i, j] and beats[j, k] and beats[k, i]:
                    cycles.append((i, j, k))
    return cycles


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    weights: NDArray
    value: float

    def as_policy(self, policies: Sequence[Policy]) -> MixedPolicy:
        """Mixed policy over the (deterministic) tournament entrants."""
        if not all(isinstance(p, DeterministicPolicy) for p in policies):
            raise ValidationError("mixed policies randomise over deterministic policies only")
        w = np.clip(self.weights, 0.0, None)
        return MixedPolicy(tuple(policies), tuple(w / w.sum()))


def optimal_mixed_policy(t: Tournament) -> MixedStrategy:
    """Maximin strategy of the symmetric zero-sum game with payoff ``p - q``."""
    M = t.payoff()
    n = len(M)
    if n == 0:
        raise ValidationError("empty tournament")
    # variables: w_1..w_n >= 0, v free; maximise v
    rows = [(list(M[:, j]) + [-1.0], ">=", 0.0) for j in range(n)]
    rows.append(([1.0] * n + [0.0], "=", 1.0))
    lp = build_lp([0.0] * n + [1.0], rows, bounds=[(0.0, None)] * n + [(None, None)], maximize=True)
    sol = solve_lp(lp)
    if not sol.ok:
        raise NumericalError(f"matrix game LP ended with status {sol.status}")
    w = np.clip(sol.x[:n], 0.0, None)
    return MixedStrategy(w / w.sum(), float(sol.x[n]))


def guaranteed_payoff(t: Tournament, weights) -> float:
    """Worst-case payoff ``min_j sum_i w_i M[i, j]`` of a mixed strategy."""
    return float(np.min(np.asarray(weights, dtype=float) @ t.payoff()))
