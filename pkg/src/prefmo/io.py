"""JSON instance, oracle and result documents.

Instance documents look like::

    {
      "schema_version": 1,
      "states": ["s0", "s1"],
      "actions": ["stay", "go"],
      "gamma": 0.9,
      "transitions": [{"from": "s0", "action": "go", "to": "s1", "prob": 1.0}, ...],
      "reward": {"kind": "scalar", "values": [[0.0, 1.0], [0.5, 0.0]]},
      "initial_distribution": [0.5, 0.5],
      "preference": {"ordered_rewards": [1, 0]}
    }

Transitions are sparse: omitted triples have probability 0. States and
actions in transitions and histories may be given by name or by index.
Reward kinds are ``scalar`` (``values[s][a]``), ``vector``
(``values[s][a][k]``) and ``symbolic`` (0-based ``labels[s][a]`` plus
``n_labels``). The optional preference block holds either
``ordered_rewards`` (labels from worst to best) or ``ordered_histories``
(a list of ``{"states": [...], "actions": [...]}``, least preferred first).

Results are written with sorted keys and floats printed with 17
significant digits, so identical inputs give identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from prefmo.errors import ValidationError
from prefmo.mdp import (
    History,
    MdpInstance,
    ScalarReward,
    SymbolicReward,
    VectorReward,
)
from prefmo.transforms import OrderedHistories, RewardOrder

SCHEMA_VERSION = 1

_INSTANCE_FIELDS = {
    "schema_version",
    "states",
    "actions",
    "gamma",
    "transitions",
    "reward",
    "initial_distribution",
    "preference",
}
_REQUIRED = _INSTANCE_FIELDS - {"preference"}
_TRIPLE_FIELDS = {"from", "action", "to", "prob"}
_REWARD_FIELDS = {
    "scalar": {"kind", "values"},
    "vector": {"kind", "values"},
    "symbolic": {"kind", "labels", "n_labels"},
}
_ORACLE_FIELDS = {"schema_version", "true_values", "weights"}


class DocumentWarning(UserWarning):
    """Unknown fields ignored in non-strict mode."""


@dataclass(frozen=True)
class PreferenceSpec:
    """Known order information attached to a symbolic instance."""

    order: RewardOrder | None = None
    histories: OrderedHistories | None = None


@dataclass(frozen=True)
class LoadedInstance:
    mdp: MdpInstance
    preference: PreferenceSpec | None
    digest: str


@dataclass(frozen=True)
class OracleDocument:
    """Hidden ground truth for simulated elicitation.

    Exactly one of ``true_values`` (reward values by label) or ``weights``
    (objective weights for a vector instance) is set.
    """

    true_values: np.ndarray | None = None
    weights: np.ndarray | None = None


# --------------------------------------------------------------------------- parsing helpers


def _fail(path: str, msg: str) -> ValidationError:
    return ValidationError(f"{path}: {msg}")


def _check_fields(obj: Any, allowed: set[str], path: str, strict: bool, required: set[str] = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise _fail(path, "expected an object")
    missing = sorted(required - obj.keys())
    if missing:
        raise _fail(path, f"missing field(s) {missing}")
    unknown = sorted(obj.keys() - allowed)
    if unknown:
        if strict:
            raise _fail(path, f"unknown field(s) {unknown}")
        warnings.warn(f"{path}: ignoring unknown field(s) {unknown}", DocumentWarning, stacklevel=3)
    return obj


def _number(x: Any, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise _fail(path, f"expected a number, got {x!r}")
    if not math.isfinite(x):
        raise _fail(path, "expected a finite number")
    return float(x)


def _integer(x: Any, path: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise _fail(path, f"expected an integer, got {x!r}")
    return x


def _array(x: Any, shape: tuple[int, ...], path: str, conv=_number) -> np.ndarray:
    """Nested lists of the given shape, converted element by element."""
    if not shape:
        return conv(x, path)
    if not isinstance(x, list) or len(x) != shape[0]:
        raise _fail(path, f"expected a list of length {shape[0]}")
    return np.array([_array(v, shape[1:], f"{path}[{i}]", conv) for i, v in enumerate(x)])


def _names(x: Any, path: str) -> list[str]:
    if not isinstance(x, list) or not x:
        raise _fail(path, "expected a nonempty list of names")
    for i, n in enumerate(x):
        if not isinstance(n, str):
            raise _fail(f"{path}[{i}]", "names must be strings")
    if len(set(x)) != len(x):
        raise _fail(path, "names must be unique")
    return list(x)


def _resolve(x: Any, names: list[str], path: str) -> int:
    if isinstance(x, str):
        if x not in names:
            raise _fail(path, f"unknown name {x!r}")
        return names.index(x)
    i = _integer(x, path)
    if not 0 <= i < len(names):
        raise _fail(path, f"index {i} out of range")
    return i


def _history(obj: Any, states: list[str], actions: list[str], path: str, strict: bool) -> History:
    obj = _check_fields(obj, {"states", "actions"}, path, strict, {"states", "actions"})
    if not isinstance(obj["states"], list) or not isinstance(obj["actions"], list):
        raise _fail(path, "states and actions must be lists")
    ss = [_resolve(s, states, f"{path}.states[{i}]") for i, s in enumerate(obj["states"])]
    aa = [_resolve(a, actions, f"{path}.actions[{i}]") for i, a in enumerate(obj["actions"])]
    try:
        return History(tuple(ss), tuple(aa))
    except ValidationError as exc:
        raise _fail(path, str(exc)) from None


# --------------------------------------------------------------------------- instances


def parse_instance(doc: Any, strict: bool = True) -> tuple[MdpInstance, PreferenceSpec | None]:
    """Build an instance (and optional preference block) from a decoded JSON document.

    Raises:
        ValidationError: with a ``$.path.to.field`` prefix locating the problem.
    """
    doc = _check_fields(doc, _INSTANCE_FIELDS, "$", strict, _REQUIRED)
    if doc["schema_version"] != SCHEMA_VERSION:
        raise _fail("$.schema_version", f"unsupported version {doc['schema_version']!r}")
    states = _names(doc["states"], "$.states")
    actions = _names(doc["actions"], "$.actions")
    S, A = len(states), len(actions)
    gamma = _number(doc["gamma"], "$.gamma")

    if not isinstance(doc["transitions"], list):
        raise _fail("$.transitions", "expected a list of transition triples")
    T = np.zeros((S, A, S))
    seen = set()
    for k, tr in enumerate(doc["transitions"]):
        path = f"$.transitions[{k}]"
        tr = _check_fields(tr, _TRIPLE_FIELDS, path, strict, _TRIPLE_FIELDS)
        s = _resolve(tr["from"], states, f"{path}.from")
        a = _resolve(tr["action"], actions, f"{path}.action")
        t = _resolve(tr["to"], states, f"{path}.to")
        p = _number(tr["prob"], f"{path}.prob")
        if p < 0:
            raise _fail(f"{path}.prob", "probabilities must be nonnegative")
        if (s, a, t) in seen:
            raise _fail(path, f"duplicate triple ({states[s]}, {actions[a]}, {states[t]})")
        seen.add((s, a, t))
        T[s, a, t] = p
    sums = T.sum(axis=2)
    for s in range(S):
        for a in range(A):
            if abs(sums[s, a] - 1.0) > 1e-12:
                raise _fail(
                    "$.transitions",
                    f"probabilities for (s={states[s]!r}, a={actions[a]!r}) sum to {float(sums[s, a])!r}, not 1",
                )

    rdoc = doc["reward"]
    if not isinstance(rdoc, dict) or rdoc.get("kind") not in _REWARD_FIELDS:
        raise _fail("$.reward.kind", f"expected one of {sorted(_REWARD_FIELDS)}")
    kind = rdoc["kind"]
    rdoc = _check_fields(rdoc, _REWARD_FIELDS[kind], "$.reward", strict, _REWARD_FIELDS[kind])
    if kind == "scalar":
        reward = ScalarReward(_array(rdoc["values"], (S, A), "$.reward.values"))
    elif kind == "vector":
        vals = rdoc["values"]
        try:
            d = len(vals[0][0])
        except (TypeError, IndexError, KeyError):
            raise _fail("$.reward.values", "expected values[s][a] to be a list of numbers") from None
        if d < 1:
            raise _fail("$.reward.values", "reward vectors must be nonempty")
        reward = VectorReward(_array(vals, (S, A, d), "$.reward.values"))
    else:
        d = _integer(rdoc["n_labels"], "$.reward.n_labels")
        labels = _array(rdoc["labels"], (S, A), "$.reward.labels", _integer)
        try:
            reward = SymbolicReward(labels, d)
        except ValidationError as exc:
            raise _fail("$.reward", str(exc)) from None

    mu = _array(doc["initial_distribution"], (S,), "$.initial_distribution")
    try:
        mdp = MdpInstance(T, gamma, reward, mu, tuple(states), tuple(actions))
    except ValidationError as exc:
        raise _fail("$", str(exc)) from None

    pref = None
    if doc.get("preference") is not None:
        pdoc = _check_fields(doc["preference"], {"ordered_rewards", "ordered_histories"}, "$.preference", strict)
        if ("ordered_rewards" in pdoc) == ("ordered_histories" in pdoc):
            raise _fail("$.preference", "give exactly one of ordered_rewards or ordered_histories")
        if not isinstance(reward, SymbolicReward):
            raise _fail("$.preference", "a preference block needs a symbolic reward")
        if "ordered_rewards" in pdoc:
            perm = pdoc["ordered_rewards"]
            if not isinstance(perm, list):
                raise _fail("$.preference.ordered_rewards", "expected a list of labels")
            perm = [_integer(x, f"$.preference.ordered_rewards[{i}]") for i, x in enumerate(perm)]
            if sorted(perm) != list(range(reward.n_labels)):
                raise _fail("$.preference.ordered_rewards", f"expected a permutation of 0..{reward.n_labels - 1}")
            pref = PreferenceSpec(order=RewardOrder(tuple(perm)))
        else:
            hs = pdoc["ordered_histories"]
            if not isinstance(hs, list) or len(hs) != reward.n_labels:
                raise _fail("$.preference.ordered_histories", f"expected a list of {reward.n_labels} histories")
            parsed = []
            for i, h in enumerate(hs):
                path = f"$.preference.ordered_histories[{i}]"
                hist = _history(h, states, actions, path, strict)
                try:
                    hist.validate(mdp)
                except ValidationError as exc:
                    raise _fail(path, str(exc)) from None
                parsed.append(hist)
            pref = PreferenceSpec(histories=OrderedHistories(tuple(parsed)))
    return mdp, pref


def digest_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _read_json(path: str | Path) -> tuple[Any, bytes]:
    raw = Path(path).read_bytes()
    try:
        return json.loads(raw.decode("utf-8")), raw
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: not valid UTF-8 JSON ({exc})") from None


def load_instance(path: str | Path, strict: bool = True) -> LoadedInstance:
    """Read and validate an instance document; unknown fields warn instead of failing when not ``strict``."""
    doc, raw = _read_json(path)
    mdp, pref = parse_instance(doc, strict)
    return LoadedInstance(mdp, pref, digest_bytes(raw))


def instance_to_document(mdp: MdpInstance, preference: PreferenceSpec | None = None) -> dict:
    """Inverse of :func:`parse_instance` (names are used for states and actions)."""
    S, A = mdp.n_states, mdp.n_actions
    triples = [
        {"from": mdp.state_names[s], "action": mdp.action_names[a], "to": mdp.state_names[t], "prob": float(mdp.transition[s, a, t])}
        for s in range(S)
        for a in range(A)
        for t in range(S)
        if mdp.transition[s, a, t] > 0
    ]
    r = mdp.reward
    if isinstance(r, ScalarReward):
        reward = {"kind": "scalar", "values": r.values.tolist()}
    elif isinstance(r, VectorReward):
        reward = {"kind": "vector", "values": r.values.tolist()}
    else:
        reward = {"kind": "symbolic", "labels": r.labels.tolist(), "n_labels": r.n_labels}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "states": list(mdp.state_names),
        "actions": list(mdp.action_names),
        "gamma": mdp.gamma,
        "transitions": triples,
        "reward": reward,
        "initial_distribution": mdp.initial.tolist(),
    }
    if preference is not None and preference.order is not None:
        doc["preference"] = {"ordered_rewards": list(preference.order.ascending)}
    elif preference is not None and preference.histories is not None:
        doc["preference"] = {
            "ordered_histories": [
                {
                    "states": [mdp.state_names[s] for s in h.states],
                    "actions": [mdp.action_names[a] for a in h.actions],
                }
                for h in preference.histories.histories
            ]
        }
    return doc


def write_instance(mdp: MdpInstance, path: str | Path, preference: PreferenceSpec | None = None) -> None:
    Path(path).write_text(dumps(instance_to_document(mdp, preference)), encoding="utf-8")


# --------------------------------------------------------------------------- oracle documents


def parse_oracle(doc: Any, strict: bool = True) -> OracleDocument:
    doc = _check_fields(doc, _ORACLE_FIELDS, "$", strict, {"schema_version"})
    if doc["schema_version"] != SCHEMA_VERSION:
        raise _fail("$.schema_version", f"unsupported version {doc['schema_version']!r}")
    if ("true_values" in doc) == ("weights" in doc):
        raise _fail("$", "give exactly one of true_values or weights")
    key = "true_values" if "true_values" in doc else "weights"
    vals = doc[key]
    if not isinstance(vals, list) or not vals:
        raise _fail(f"$.{key}", "expected a nonempty list of numbers")
    arr = np.array([_number(v, f"$.{key}[{i}]") for i, v in enumerate(vals)])
    return OracleDocument(**{key: arr})


def load_oracle(path: str | Path, strict: bool = True) -> OracleDocument:
    doc, _ = _read_json(path)
    return parse_oracle(doc, strict)


# --------------------------------------------------------------------------- canonical output


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays, tuples and dataclass-free containers to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValidationError(f"cannot emit non-finite number {x!r}")
    s = format(x, ".17g")
    if all(c not in s for c in ".en"):
        s += ".0"
    return s


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items())
        body = ",\n".join(f"{pad}{json.dumps(k, ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in items)
        return "{\n" + body + "\n" + end + "}"
    raise ValidationError(f"cannot emit object of type {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Canonical JSON: sorted keys, 17-significant-digit floats, trailing newline."""
    return _encode(_plain(obj), indent, 0) + "\n"


@dataclass(frozen=True)
class ResultDocument:
    """Output of one command.

    ``wall_time`` stays ``None`` unless timing was requested, so the default
    output depends only on the inputs and the seed.
    """

    command: list[str]
    input_digest: str | None
    seed: int | None
    tolerances: dict
    outputs: dict
    wall_time: float | None = None

    def to_dict(self) -> dict:
        return {
            "command": list(self.command),
            "input_digest": self.input_digest,
            "seed": self.seed,
            "tolerances": self.tolerances,
            "outputs": self.outputs,
            "wall_time": self.wall_time,
        }


def emit_result(doc: ResultDocument, path: str | Path | None = None) -> str:
    """Serialise ``doc`` canonically; write it to ``path`` when given. Returns the text."""
    text = dumps(doc.to_dict())
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
