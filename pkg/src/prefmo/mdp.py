"""Finite discounted MDPs: instances, policies, histories and scalar solvers.

States and actions are integer indices ``0..S-1`` and ``0..A-1``; optional
names are carried for I/O only. Arrays held by :class:`MdpInstance` and the
policy classes are copied and made read-only at construction, so instances
can be shared freely between threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from prefmo.errors import CapExceededError, NumericalError, ValidationError

PROB_ATOL = 1e-12
DEFAULT_TOL = 1e-9
DEFAULT_HISTORY_CAP = 10**6
DEFAULT_POLICY_CAP = 10**5


def _frozen(a: ArrayLike, dtype=float) -> NDArray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------- rewards


@dataclass(frozen=True, eq=False)
class ScalarReward:
    """Numeric reward ``R(s, a)``, shape ``(S, A)``."""

    values: NDArray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 2:
            raise ValidationError("scalar reward must have shape (S, A)")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("scalar reward has non-finite entries")


@dataclass(frozen=True, eq=False)
class VectorReward:
    """Vector reward ``R(s, a) in R^d``, shape ``(S, A, d)``."""

    values: NDArray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 3 or self.values.shape[2] < 1:
            raise ValidationError("vector reward must have shape (S, A, d) with d >= 1")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("vector reward has non-finite entries")

    @property
    def dim(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class SymbolicReward:
    """Order-only reward: ``labels[s, a]`` is the index ``i`` of the unknown value ``x_i``.

    Labels are 0-based. After canonicalisation (see ``prefmo.transforms``)
    label ``i`` is the ``i``-th smallest unknown reward.
    """

    labels: NDArray
    n_labels: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValidationError("symbolic reward must have shape (S, A)")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ValidationError("symbolic labels must be integers")
        object.__setattr__(self, "labels", _frozen(labels, dtype=np.int64))
        d = int(self.n_labels)
        object.__setattr__(self, "n_labels", d)
        if d < 1:
            raise ValidationError("symbolic reward needs at least one label")
        if self.labels.min() < 0 or self.labels.max() >= d:
            raise ValidationError(f"symbolic labels must lie in [0, {d - 1}]")
        unused = sorted(set(range(d)) - set(np.unique(self.labels).tolist()))
        if unused:
            raise ValidationError(f"labels {unused} are not used by any (s, a)")

    @property
    def dim(self) -> int:
        return self.n_labels

    def substitute(self, values: ArrayLike) -> ScalarReward:
        """Scalar reward obtained by plugging numeric values in for the labels."""
        x = np.asarray(values, dtype=float)
        if x.shape != (self.n_labels,):
            raise ValidationError(f"expected {self.n_labels} reward values, got shape {x.shape}")
        return ScalarReward(x[self.labels])


RewardSpec = Union[ScalarReward, VectorReward, SymbolicReward]


# --------------------------------------------------------------------------- instance


@dataclass(frozen=True, eq=False)
class MdpInstance:
    """A finite discounted MDP.

    Attributes:
        transition: ``T[s, a, s']``, shape ``(S, A, S)``.
        gamma: discount factor in ``[0, 1)``.
        reward: one of :class:`ScalarReward`, :class:`VectorReward`,
            :class:`SymbolicReward`.
        initial: strictly positive initial distribution ``mu``, shape ``(S,)``.
        state_names, action_names: labels used by the JSON documents.
    """

    transition: NDArray
    gamma: float
    reward: RewardSpec
    initial: NDArray
    state_names: tuple[str, ...] = field(default=())
    action_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        T = _frozen(self.transition)
        mu = _frozen(self.initial)
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "initial", mu)
        object.__setattr__(self, "gamma", float(self.gamma))
        if T.ndim != 3 or T.shape[0] != T.shape[2] or T.shape[0] < 1 or T.shape[1] < 1:
            raise ValidationError(f"transition must have shape (S, A, S), got {T.shape}")
        S, A = T.shape[:2]
        if np.any(T < 0) or not np.all(np.isfinite(T)):
            raise ValidationError("transition probabilities must be finite and nonnegative")
        sums = T.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > PROB_ATOL)
        if len(bad):
            s, a = bad[0]
            raise ValidationError(
                f"transition probabilities for (s={s}, a={a}) sum to {float(sums[s, a])!r}, not 1"
            )
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError(f"discount must lie in [0, 1), got {self.gamma}")
        if mu.shape != (S,):
            raise ValidationError(f"initial distribution must have shape ({S},)")
        if np.any(mu <= 0) or abs(mu.sum() - 1.0) > PROB_ATOL:
            raise ValidationError("initial distribution must be strictly positive and sum to 1")
        if not isinstance(self.reward, (ScalarReward, VectorReward, SymbolicReward)):
            raise ValidationError(f"unsupported reward type {type(self.reward).__name__}")
        rshape = (self.reward.labels if isinstance(self.reward, SymbolicReward) else self.reward.values).shape
        if rshape[:2] != (S, A):
            raise ValidationError(f"reward covers shape {rshape[:2]}, expected {(S, A)}")
        names = tuple(self.state_names) or tuple(f"s{i}" for i in range(S))
        anames = tuple(self.action_names) or tuple(f"a{i}" for i in range(A))
        if len(names) != S or len(set(names)) != S:
            raise ValidationError("state names must be unique, one per state")
        if len(anames) != A or len(set(anames)) != A:
            raise ValidationError("action names must be unique, one per action")
        object.__setattr__(self, "state_names", names)
        object.__setattr__(self, "action_names", anames)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def with_reward(self, reward: RewardSpec) -> "MdpInstance":
        return replace(self, reward=reward)

    def scalar_rewards(self) -> NDArray:
        if isinstance(self.reward, ScalarReward):
            return self.reward.values
        raise ValidationError(
            f"operation needs a scalar reward, instance has {type(self.reward).__name__}"
        )

    def vector_rewards(self) -> NDArray:
        if isinstance(self.reward, VectorReward):
            return self.reward.values
        raise ValidationError(
            f"operation needs a vector reward, instance has {type(self.reward).__name__}"
        )


# --------------------------------------------------------------------------- policies


@dataclass(frozen=True)
class DeterministicPolicy:
    """Stationary deterministic policy: ``actions[s]`` is the action taken in ``s``."""

    actions: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))

    def matrix(self, n_actions: int) -> NDArray:
        m = np.zeros((len(self.actions), n_actions))
        m[np.arange(len(self.actions)), self.actions] = 1.0
        return m


@dataclass(frozen=True, eq=False)
class RandomizedPolicy:
    """Stationary randomized policy ``probs[s, a] = pi(s, a)``."""

    probs: NDArray

    def __post_init__(self):
        p = _frozen(self.probs)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2:
            raise ValidationError("randomized policy must have shape (S, A)")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > PROB_ATOL):
            raise ValidationError("randomized policy rows must be distributions")

    def matrix(self, n_actions: int) -> NDArray:
        return np.array(self.probs)


@dataclass(frozen=True)
class MixedPolicy:
    """Distribution over deterministic policies (randomisation over policies, not actions)."""

    policies: tuple[DeterministicPolicy, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "policies", tuple(self.policies))
        if len(w) != len(self.policies) or not w:
            raise ValidationError("mixed policy needs one weight per component")
        if min(w) < 0 or abs(sum(w) - 1.0) > PROB_ATOL:
            raise ValidationError("mixed policy weights must form a distribution")


Policy = Union[DeterministicPolicy, RandomizedPolicy, MixedPolicy]


def policy_matrix(mdp: MdpInstance, policy: Policy) -> NDArray:
    """Return ``pi(s, a)`` as an ``(S, A)`` array, validating shape."""
    if isinstance(policy, MixedPolicy):
        raise ValidationError("mixed policies have no stationary matrix; evaluate components instead")
    if isinstance(policy, DeterministicPolicy):
        if len(policy.actions) != mdp.n_states:
            raise ValidationError(f"policy covers {len(policy.actions)} states, instance has {mdp.n_states}")
        if policy.actions and (min(policy.actions) < 0 or max(policy.actions) >= mdp.n_actions):
            raise ValidationError("policy uses an action index out of range")
        return policy.matrix(mdp.n_actions)
    if isinstance(policy, RandomizedPolicy):
        if policy.probs.shape != (mdp.n_states, mdp.n_actions):
            raise ValidationError(f"policy shape {policy.probs.shape} does not match instance")
        return policy.matrix(mdp.n_actions)
    raise ValidationError(f"not a policy: {policy!r}")


def enumerate_deterministic_policies(
    mdp: MdpInstance, cap: int = DEFAULT_POLICY_CAP
) -> Iterator[DeterministicPolicy]:
    """All deterministic stationary policies in lexicographic order of action tuples."""
    count = mdp.n_actions**mdp.n_states
    if count > cap:
        raise CapExceededError(f"{count} deterministic policies exceed cap {cap}")
    for actions in itertools.product(range(mdp.n_actions), repeat=mdp.n_states):
        yield DeterministicPolicy(actions)


# --------------------------------------------------------------------------- evaluation


def evaluate_batch(
    transition: NDArray,
    gamma: float,
    rewards: NDArray,
    pmats: NDArray,
    tol: float = DEFAULT_TOL,
    max_iter: int = 10_000_000,
) -> NDArray:
    """Iterate ``v <- r_pi + gamma P_pi v`` from ``v = 0`` for a batch of policies.

    Args:
        transition: ``(S, A, S)``.
        rewards: ``(S, A, k)``, k reward coordinates evaluated jointly.
        pmats: ``(B, S, A)`` policy matrices.

    Returns:
        ``(B, S, k)`` values whose sup-norm Bellman residual is ``<= tol``.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    P = np.einsum("bsa,sat->bst", pmats, transition)
    r = np.einsum("bsa,sak->bsk", pmats, rewards)
    v = np.zeros_like(r)
    for _ in range(max_iter):
        nxt = r + gamma * np.matmul(P, v)
        delta = np.max(np.abs(nxt - v)) if nxt.size else 0.0
        v = nxt
        # residual of the returned iterate is at most gamma * delta
        if gamma * delta <= tol:
            return v
    raise NumericalError(f"policy evaluation did not converge in {max_iter} iterations")


def evaluate_policy(mdp: MdpInstance, policy: Policy, tol: float = DEFAULT_TOL) -> NDArray:
    """Value function ``v^pi`` of a stationary policy under a scalar reward."""
    R = mdp.scalar_rewards()
    pm = policy_matrix(mdp, policy)
    return evaluate_batch(mdp.transition, mdp.gamma, R[:, :, None], pm[None], tol)[0, :, 0]


def bellman_backup(mdp: MdpInstance, v: ArrayLike) -> NDArray:
    """Action values ``Q(s, a) = R(s, a) + gamma * sum_s' T(s, a, s') v(s')``."""
    R = mdp.scalar_rewards()
    return R + mdp.gamma * (mdp.transition @ np.asarray(v, dtype=float))


def _greedy(q: NDArray) -> DeterministicPolicy:
    # actions within rounding of the best count as tied; the lowest index wins
    slack = 1e-12 * max(1.0, float(np.abs(q).max()))
    return DeterministicPolicy(tuple(np.argmax(q >= q.max(axis=1, keepdims=True) - slack, axis=1)))


def value_iteration(
    mdp: MdpInstance, tol: float = DEFAULT_TOL, max_iter: int = 10_000_000
) -> tuple[NDArray, DeterministicPolicy]:
    """Optimal values and a greedy policy (ties go to the lowest action index).

    Once the iterates converge, the greedy policy is evaluated exactly by a
    linear solve; that value replaces the iterate when its Bellman
    optimality residual is no larger, which removes the truncation error
    whenever the greedy policy is already optimal.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        nxt = bellman_backup(mdp, v).max(axis=1)
        delta = np.max(np.abs(nxt - v))
        v = nxt
        if mdp.gamma * delta <= tol:
            break
    else:
        raise NumericalError(f"value iteration did not converge in {max_iter} iterations")
    q = bellman_backup(mdp, v)
    pol = _greedy(q)
    pm = pol.matrix(mdp.n_actions)
    P = np.einsum("sa,sat->st", pm, mdp.transition)
    r = (pm * mdp.scalar_rewards()).sum(axis=1)
    exact = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P, r)
    q_exact = bellman_backup(mdp, exact)
    if np.max(np.abs(q_exact.max(axis=1) - exact)) <= np.max(np.abs(q.max(axis=1) - v)):
        return exact, _greedy(q_exact)
    return v, pol


# --------------------------------------------------------------------------- histories


@dataclass(frozen=True)
class History:
    """A t-step history ``(s_0, a_1, s_1, ..., a_t, s_t)``."""

    states: tuple[int, ...]
    actions: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        if len(self.states) != len(self.actions) + 1:
            raise ValidationError("a history has exactly one more state than actions")

    @property
    def length(self) -> int:
        return len(self.actions)

    def __add__(self, other: "History") -> "History":
        if other.states[0] != self.states[-1]:
            raise ValidationError("concatenated history must start where the first one ends")
        return History(self.states + other.states[1:], self.actions + other.actions)

    def validate(self, mdp: MdpInstance) -> None:
        S, A = mdp.n_states, mdp.n_actions
        if any(not 0 <= s < S for s in self.states) or any(not 0 <= a < A for a in self.actions):
            raise ValidationError(f"history {self} references unknown states or actions")
        for i, a in enumerate(self.actions):
            s, nxt = self.states[i], self.states[i + 1]
            if mdp.transition[s, a, nxt] <= 0:
                raise ValidationError(f"history step {i}: transition ({s}, {a}) -> {nxt} has probability 0")


def discounted_sum(mdp: MdpInstance, h: History, rewards: NDArray) -> NDArray:
    """``sum_i gamma^(i-1) rewards[s_{i-1}, a_i]`` for any trailing reward shape."""
    h.validate(mdp)
    total = np.zeros(rewards.shape[2:])
    disc = 1.0
    for s, a in zip(h.states[:-1], h.actions):
        total = total + disc * rewards[s, a]
        disc *= mdp.gamma
    return total


def history_value(mdp: MdpInstance, h: History) -> float:
    """Discounted reward collected along ``h`` (0 for the empty history)."""
    return float(discounted_sum(mdp, h, mdp.scalar_rewards()))


def _start_distribution(mdp: MdpInstance, start: int | None) -> NDArray:
    if start is None:
        return np.array(mdp.initial)
    if not 0 <= start < mdp.n_states:
        raise ValidationError(f"start state {start} out of range")
    d = np.zeros(mdp.n_states)
    d[start] = 1.0
    return d


def enumerate_paths(
    mdp: MdpInstance,
    policy: Policy,
    horizon: int,
    start: int | None = None,
    cap: int = DEFAULT_HISTORY_CAP,
) -> tuple[NDArray, NDArray, NDArray]:
    """Array form of :func:`enumerate_histories`.

    Returns:
        ``(states (N, H+1), actions (N, H), probs (N,))`` over all
        positive-probability paths.
    """
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    pm = policy_matrix(mdp, policy)
    T = mdp.transition
    d0 = _start_distribution(mdp, start)
    states = np.flatnonzero(d0)[:, None]
    actions = np.zeros((len(states), 0), dtype=np.int64)
    probs = d0[states[:, 0]]
    for _ in range(horizon):
        cur = states[:, -1]
        branch = probs[:, None, None] * pm[cur][:, :, None] * T[cur]
        idx_n, idx_a, idx_s = np.nonzero(branch > 0)
        if len(idx_n) > cap:
            raise CapExceededError(f"history enumeration reached {len(idx_n)} paths, cap is {cap}")
        states = np.concatenate([states[idx_n], idx_s[:, None]], axis=1)
        actions = np.concatenate([actions[idx_n], idx_a[:, None]], axis=1)
        probs = branch[idx_n, idx_a, idx_s]
    if len(probs) > cap:
        raise CapExceededError(f"history enumeration reached {len(probs)} paths, cap is {cap}")
    return states, actions, probs


def enumerate_histories(
    mdp: MdpInstance,
    policy: Policy,
    horizon: int,
    start: int | None = None,
    cap: int = DEFAULT_HISTORY_CAP,
) -> list[tuple[History, float]]:
    """Every positive-probability history of the given length with its probability.

    Starts from ``start`` if given, otherwise from the initial distribution.
    Raises :class:`CapExceededError` once more than ``cap`` paths are live.
    """
    states, actions, probs = enumerate_paths(mdp, policy, horizon, start, cap)
    return [(History(s, a), float(p)) for s, a, p in zip(states.tolist(), actions.tolist(), probs)]


def _draw(cdf: NDArray, u: NDArray) -> NDArray:
    # inverse-CDF draw, guarded against cdf[-1] < 1 by rounding
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, cdf.shape[1] - 1)


def sample_paths(
    mdp: MdpInstance,
    policy: Policy,
    horizon: int,
    n: int,
    seed: int | np.random.Generator | None = None,
    start: int | None = None,
) -> tuple[NDArray, NDArray]:
    """Draw ``n`` independent paths; returns ``(states (n, H+1), actions (n, H))``."""
    if horizon < 0 or n < 1:
        raise ValidationError("need horizon >= 0 and n >= 1")
    rng = np.random.default_rng(seed)
    pm_cdf = np.cumsum(policy_matrix(mdp, policy), axis=1)
    T_cdf = np.cumsum(mdp.transition, axis=2)
    d0 = _start_distribution(mdp, start)
    states = np.empty((n, horizon + 1), dtype=np.int64)
    actions = np.empty((n, horizon), dtype=np.int64)
    states[:, 0] = _draw(np.broadcast_to(np.cumsum(d0), (n, len(d0))), rng.random(n))
    for t in range(horizon):
        s = states[:, t]
        a = _draw(pm_cdf[s], rng.random(n))
        actions[:, t] = a
        states[:, t + 1] = _draw(T_cdf[s, a], rng.random(n))
    return states, actions


def sample_history(
    mdp: MdpInstance,
    policy: Policy,
    horizon: int,
    seed: int | np.random.Generator | None = None,
    start: int | None = None,
) -> History:
    """One sampled history of length ``horizon``; reproducible under ``seed``."""
    states, actions = sample_paths(mdp, policy, horizon, 1, seed, start)
    return History(states[0].tolist(), actions[0].tolist())


def path_rewards(mdp: MdpInstance, states: NDArray, actions: NDArray, rewards: NDArray) -> NDArray:
    """Discounted reward sums for arrays of paths; ``rewards`` has shape ``(S, A, ...)``."""
    disc = mdp.gamma ** np.arange(actions.shape[1])
    return np.einsum("h,nh...->n...", disc, rewards[states[:, :-1], actions])


def truncation_horizon(gamma: float, rel_bound: float = 1e-6) -> int:
    """Smallest ``H`` with ``gamma^H < rel_bound``.

    The tail of a discounted sum after ``H`` steps is at most
    ``gamma^H * R_max / (1 - gamma)``, i.e. a ``gamma^H`` fraction of the value scale.
    """
    if not 0.0 <= gamma < 1.0 or not 0.0 < rel_bound < 1.0:
        raise ValidationError("need gamma in [0, 1) and rel_bound in (0, 1)")
    if gamma == 0.0:
        return 1
    H = max(1, math.ceil(math.log(rel_bound) / math.log(gamma)))
    while gamma**H >= rel_bound:
        H += 1
    return H


def random_instance(
    n_states: int,
    n_actions: int,
    seed: int | np.random.Generator | None = None,
    gamma: float = 0.9,
    reward: str = "scalar",
    dim: int = 1,
    sparsity: float = 0.0,
) -> MdpInstance:
    """Random instance for tests and demos.

    Args:
        reward: ``"scalar"``, ``"vector"`` (uniform on [0, 1]^dim) or
            ``"symbolic"`` (``dim`` labels, each used at least once).
        sparsity: probability of zeroing a transition entry (each row keeps
            at least one successor).
    """
    rng = np.random.default_rng(seed)
    S, A = n_states, n_actions
    T = rng.random((S, A, S))
    if sparsity > 0:
        mask = rng.random((S, A, S)) < sparsity
        keep = rng.integers(S, size=(S, A))
        mask[np.arange(S)[:, None], np.arange(A)[None, :], keep] = False
        T[mask] = 0.0
    T /= T.sum(axis=2, keepdims=True)
    mu = rng.random(S) + 0.1
    mu /= mu.sum()
    if reward == "scalar":
        spec: RewardSpec = ScalarReward(rng.random((S, A)))
    elif reward == "vector":
        spec = VectorReward(rng.random((S, A, dim)))
    elif reward == "symbolic":
        if dim > S * A:
            raise ValidationError("more labels than (s, a) pairs")
        flat = np.concatenate([np.arange(dim), rng.integers(dim, size=S * A - dim)])
        spec = SymbolicReward(rng.permutation(flat).reshape(S, A), dim)
    else:
        raise ValidationError(f"unknown reward kind {reward!r}")
    return MdpInstance(T, gamma, spec, mu)


def chain_instance(gamma: float, rewards: Sequence[float]) -> MdpInstance:
    """Deterministic single-action chain ``0 -> 1 -> ... -> n-1 -> n-1``."""
    n = len(rewards)
    T = np.zeros((n, 1, n))
    for s in range(n):
        T[s, 0, min(s + 1, n - 1)] = 1.0
    return MdpInstance(T, gamma, ScalarReward(np.asarray(rewards, float)[:, None]), np.full(n, 1.0 / n))
