"""From order-only rewards to vector rewards.

A symbolic reward assigns each ``(s, a)`` one of ``d`` unknown values
``x_0 < x_1 < ... < x_{d-1}`` (0-based, after canonicalisation). Two
constructions turn such an instance into an ordinary vector-reward MDP:

* with a known order over the unknown values, each ``(s, a)`` labelled ``i``
  receives the decumulative of the ``i``-th canonical vector;
* with a known order ``h_1 < ... < h_d`` over ``d`` histories, the
  discounted label counts of those histories form a basis matrix ``H`` and
  label ``i`` receives the decumulative of column ``i`` of ``H^-1``.

In both cases the scalar value under any admissible ``x`` is recovered as
``w . v(s)`` with ``w`` the consecutive differences of ``x`` (respectively of
the history values ``r = H^T x``), so Pareto dominance of the vector values
implies preference for every admissible ``x``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from prefmo.errors import NumericalError, SingularBasisError, ValidationError
from prefmo.mdp import (
    DEFAULT_POLICY_CAP,
    History,
    MdpInstance,
    Policy,
    RandomizedPolicy,
    SymbolicReward,
    VectorReward,
    discounted_sum,
    enumerate_deterministic_policies,
    evaluate_batch,
    evaluate_policy,
    policy_matrix,
    sample_history,
)
from prefmo.momdp import vector_evaluate

SINGULAR_RTOL = 1e-10
MAX_CONDITION = 1e6


def _symbolic(pbmdp: MdpInstance) -> SymbolicReward:
    if not isinstance(pbmdp.reward, SymbolicReward):
        raise ValidationError(f"operation needs a symbolic reward, instance has {type(pbmdp.reward).__name__}")
    return pbmdp.reward


@dataclass(frozen=True)
class RewardOrder:
    """Strict total order over reward labels.

    ``ascending[k]`` is the label holding the ``k``-th smallest value.
    """

    ascending: tuple[int, ...]

    def __post_init__(self):
        asc = tuple(int(i) for i in self.ascending)
        if sorted(asc) != list(range(len(asc))):
            raise ValidationError(f"reward order {asc} is not a permutation of 0..{len(asc) - 1}")
        object.__setattr__(self, "ascending", asc)

    @classmethod
    def identity(cls, d: int) -> "RewardOrder":
        return cls(tuple(range(d)))

    @property
    def rank(self) -> NDArray:
        """``rank[label]`` is the position of ``label`` in the order."""
        r = np.empty(len(self.ascending), dtype=np.int64)
        r[list(self.ascending)] = np.arange(len(self.ascending))
        return r

    def is_admissible(self, x: ArrayLike) -> bool:
        """Whether values indexed by label respect the order strictly."""
        x = np.asarray(x, dtype=float)
        return len(x) == len(self.ascending) and bool(np.all(np.diff(x[list(self.ascending)]) > 0))


def canonicalize(pbmdp: MdpInstance, order: RewardOrder) -> MdpInstance:
    """Relabel so that label ``k`` is the ``k``-th smallest value."""
    rew = _symbolic(pbmdp)
    if len(order.ascending) != rew.n_labels:
        raise ValidationError(f"order has {len(order.ascending)} labels, instance has {rew.n_labels}")
    return pbmdp.with_reward(SymbolicReward(order.rank[rew.labels], rew.n_labels))


def counting_reward(pbmdp: MdpInstance) -> VectorReward:
    """One-hot label indicators ``R(s, a) = 1_i`` when ``(s, a)`` carries label ``i``."""
    rew = _symbolic(pbmdp)
    return VectorReward(np.eye(rew.n_labels)[rew.labels])


def decumulative(v: ArrayLike) -> NDArray:
    """Suffix sums along the last axis: ``out_k = sum_{j >= k} v_j``."""
    v = np.asarray(v, dtype=float)
    return np.flip(np.cumsum(np.flip(v, axis=-1), axis=-1), axis=-1)


def first_difference(v: ArrayLike) -> NDArray:
    """Inverse of :func:`decumulative`: ``out_k = v_k - v_{k+1}`` (``v_{d} = 0``)."""
    v = np.asarray(v, dtype=float)
    return v - np.concatenate([v[..., 1:], np.zeros_like(v[..., :1])], axis=-1)


def difference_weights(values: ArrayLike) -> NDArray:
    """``(x_1, x_2 - x_1, ..., x_d - x_{d-1})``."""
    x = np.asarray(values, dtype=float)
    return np.concatenate([x[..., :1], np.diff(x, axis=-1)], axis=-1)


def ordered_reward_transform(pbmdp: MdpInstance, order: RewardOrder | None = None) -> MdpInstance:
    """Vector-reward instance with ``R(s, a) = decumulative(1_i)`` for label ``i``.

    With ``order`` given, labels are first canonicalised so that component
    ``k`` counts rewards at least as good as the ``k``-th smallest value.
    """
    rew = _symbolic(pbmdp)
    if order is not None:
        rew = _symbolic(canonicalize(pbmdp, order))
    steps = decumulative(np.eye(rew.n_labels))
    return pbmdp.with_reward(VectorReward(steps[rew.labels]))


# --------------------------------------------------------------------------- ordered histories


@dataclass(frozen=True)
class OrderedHistories:
    """Histories listed from least to most preferred."""

    histories: tuple[History, ...]

    def __post_init__(self):
        object.__setattr__(self, "histories", tuple(self.histories))
        if not self.histories:
            raise ValidationError("need at least one ordered history")

    def __len__(self) -> int:
        return len(self.histories)


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    """``H`` with the history count vectors as columns, and its inverse."""

    H: NDArray
    H_inv: NDArray
    condition: float

    def history_values(self, x: ArrayLike) -> NDArray:
        """``r_i = x . rbar_i`` for every ordered history."""
        return self.H.T @ np.asarray(x, dtype=float)

    def reward_values(self, r: ArrayLike) -> NDArray:
        """Label values ``x`` that give the ordered histories the values ``r``."""
        return self.H_inv.T @ np.asarray(r, dtype=float)


def history_count_vector(pbmdp: MdpInstance, h: History) -> NDArray:
    """Discounted count of each label along ``h``."""
    rew = _symbolic(pbmdp)
    return discounted_sum(pbmdp, h, np.eye(rew.n_labels)[rew.labels])


def history_basis_matrix(
    pbmdp: MdpInstance, ordered: OrderedHistories, max_condition: float | None = None
) -> BasisMatrix:
    """Basis matrix of the ordered histories.

    Inversion uses LU with partial pivoting. A pivot below
    ``SINGULAR_RTOL * ||H||_inf`` or a condition number above
    ``max_condition`` raises :class:`SingularBasisError`.
    """
    d = _symbolic(pbmdp).n_labels
    if len(ordered) != d:
        raise ValidationError(f"need exactly {d} ordered histories, got {len(ordered)}")
    H = np.column_stack([history_count_vector(pbmdp, h) for h in ordered.histories])
    norm = np.abs(H).sum(axis=1).max()
    if norm == 0:
        raise SingularBasisError("all ordered histories are empty")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(H, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < SINGULAR_RTOL * norm:
        raise SingularBasisError("history count vectors are not linearly independent")
    H_inv = scipy.linalg.lu_solve((lu, piv), np.eye(d))
    condition = float(norm * np.abs(H_inv).sum(axis=1).max())
    if max_condition is not None and condition > max_condition:
        raise SingularBasisError(f"basis condition number {condition:.3g} exceeds {max_condition:.3g}")
    if np.max(np.abs(H @ H_inv - np.eye(d))) > 1e-8:
        raise NumericalError("basis inverse failed the residual check")
    H.setflags(write=False)
    H_inv.setflags(write=False)
    return BasisMatrix(H, H_inv, condition)


def ordered_history_transform(
    pbmdp: MdpInstance, ordered: OrderedHistories, basis: BasisMatrix | None = None
) -> MdpInstance:
    """Vector-reward instance with ``R(s, a) = decumulative(H^-1[:, i])`` for label ``i``."""
    rew = _symbolic(pbmdp)
    basis = basis or history_basis_matrix(pbmdp, ordered)
    columns = decumulative(basis.H_inv.T)  # row i: decumulative of column i
    return pbmdp.with_reward(VectorReward(columns[rew.labels]))


# --------------------------------------------------------------------------- verification


def verify_lemma1(
    pbmdp: MdpInstance,
    order: RewardOrder,
    true_values: ArrayLike,
    policy: Policy,
    tol: float = 1e-12,
) -> float:
    """Largest deviation between the scalar value and its two vector reconstructions.

    ``true_values`` are indexed by label and must be strictly increasing
    along ``order``. Returns the max over states of
    ``|v(s) - x . vbar(s)|`` and ``|v(s) - diff(x) . vvec(s)|``.
    """
    x = np.asarray(true_values, dtype=float)
    if not order.is_admissible(x):
        raise ValidationError("true values must be strictly increasing along the reward order")
    canon = canonicalize(pbmdp, order)
    x_sorted = x[list(order.ascending)]
    v = evaluate_policy(canon.with_reward(_symbolic(canon).substitute(x_sorted)), policy, tol)
    vbar = vector_evaluate(canon.with_reward(counting_reward(canon)), policy, tol)
    vvec = vector_evaluate(ordered_reward_transform(canon), policy, tol)
    r1 = np.abs(v - vbar @ x_sorted).max()
    r2 = np.abs(v - vvec @ difference_weights(x_sorted)).max()
    return float(max(r1, r2))


def verify_lemma2(
    pbmdp: MdpInstance,
    ordered: OrderedHistories,
    true_values: ArrayLike,
    policy: Policy,
    tol: float = 1e-12,
    basis: BasisMatrix | None = None,
) -> float:
    """Largest deviation ``|v(s) - diff(r) . vvec_H(s)|`` with ``r = H^T x``.

    Raises:
        ValidationError: if the history values are not strictly increasing.
        SingularBasisError: if the ordered histories are not independent.
    """
    x = np.asarray(true_values, dtype=float)
    basis = basis or history_basis_matrix(pbmdp, ordered)
    r = basis.history_values(x)
    if not np.all(np.diff(r) > 0):
        raise ValidationError(f"history values {r} are not strictly increasing")
    v = evaluate_policy(pbmdp.with_reward(_symbolic(pbmdp).substitute(x)), policy, tol)
    vvec = vector_evaluate(ordered_history_transform(pbmdp, ordered, basis), policy, tol)
    return float(np.abs(v - vvec @ difference_weights(r)).max())


def sample_increasing(d: int, n: int, rng: np.random.Generator, low: float = -5.0, high: float = 5.0) -> NDArray:
    """``n`` strictly increasing vectors of length ``d``."""
    while True:
        x = np.sort(rng.uniform(low, high, size=(n, d)), axis=1)
        if np.all(np.diff(x, axis=1) > 1e-9):
            return x


@dataclass(frozen=True)
class SoundnessReport:
    passed: bool
    pairs_checked: int
    samples: int
    counterexample: dict | None = None


def dominance_soundness_check(
    pbmdp: MdpInstance,
    transformed: MdpInstance,
    true_values: ArrayLike | None = None,
    n: int = 100,
    seed: int = 0,
    order: RewardOrder | None = None,
    basis: BasisMatrix | None = None,
    cap: int = DEFAULT_POLICY_CAP,
    tol: float = 1e-11,
) -> SoundnessReport:
    """Check that statewise Pareto dominance in ``transformed`` never contradicts the scalar order.

    Every deterministic policy is evaluated under ``transformed`` and, for each
    sampled reward vector ``x`` (indexed by label), under the scalar reward
    obtained by substituting ``x`` into ``pbmdp``. Without ``true_values``,
    admissible vectors are drawn: increasing along ``order`` for the
    ordered-rewards transform, or with nonnegative increasing history values
    ``H^T x`` when ``basis`` is given.
    """
    rew = _symbolic(pbmdp)
    d = rew.n_labels
    rng = np.random.default_rng(seed)
    if true_values is None:
        if basis is not None:
            # the first difference weight is r_1 itself and multiplies a
            # policy-dependent component unless all histories share a length
            X = sample_increasing(d, n, rng, low=0.0) @ basis.H_inv
        else:
            order = order or RewardOrder.identity(d)
            X = np.empty((n, d))
            X[:, list(order.ascending)] = sample_increasing(d, n, rng)
    else:
        X = np.atleast_2d(np.asarray(true_values, dtype=float))
    policies = list(enumerate_deterministic_policies(pbmdp, cap))
    pm = np.stack([policy_matrix(pbmdp, p) for p in policies])
    vec = evaluate_batch(transformed.transition, transformed.gamma, transformed.vector_rewards(), pm, tol)
    scal = evaluate_batch(pbmdp.transition, pbmdp.gamma, np.moveaxis(X[:, rew.labels], 0, -1), pm, tol)
    atol = 1e-9 * max(1.0, np.abs(vec).max())
    geq = np.all(vec[:, None] >= vec[None, :] - atol, axis=-1)
    gt = np.any(vec[:, None] > vec[None, :] + atol, axis=-1)
    dom = geq & gt  # [i, j, s]
    slack = 1e-8 * max(1.0, np.abs(scal).max())
    worse = scal[:, None] < scal[None, :] - slack  # [i, j, s, k]
    bad = np.argwhere(dom[..., None] & worse)
    pairs = int(dom.sum())
    if len(bad):
        i, j, s, k = bad[0]
        return SoundnessReport(
            False,
            pairs,
            len(X),
            {
                "dominating_policy": policies[i].actions,
                "dominated_policy": policies[j].actions,
                "state": int(s),
                "true_values": X[k].tolist(),
                "scalar_values": [float(scal[i, s, k]), float(scal[j, s, k])],
            },
        )
    return SoundnessReport(True, pairs, len(X))


def random_ordered_histories(
    pbmdp: MdpInstance,
    rng: np.random.Generator,
    max_length: int = 6,
    max_condition: float = MAX_CONDITION,
    attempts: int = 200,
) -> tuple[OrderedHistories, BasisMatrix]:
    """Draw ``d`` random valid histories whose count vectors form a usable basis."""
    d = _symbolic(pbmdp).n_labels
    uniform = RandomizedPolicy(np.full((pbmdp.n_states, pbmdp.n_actions), 1.0 / pbmdp.n_actions))
    for _ in range(attempts):
        hs = [sample_history(pbmdp, uniform, int(rng.integers(1, max_length + 1)), rng) for _ in range(d)]
        ordered = OrderedHistories(tuple(hs))
        try:
            return ordered, history_basis_matrix(pbmdp, ordered, max_condition)
        except SingularBasisError:
            continue
    raise SingularBasisError(f"no independent history set found in {attempts} attempts")
