"""Command-line interface.

Every command writes one canonical JSON result document (to ``--out`` or
stdout) and exits with 0 on success, 2 on invalid input, 3 when an
enumeration cap is exceeded and 4 on numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from prefmo import acceptance
from prefmo.elicitation import SimulatedOracle, elicit_loop
from prefmo.errors import PrefmoError, ValidationError
from prefmo.io import (
    LoadedInstance,
    PreferenceSpec,
    ResultDocument,
    emit_result,
    instance_to_document,
    load_instance,
    load_oracle,
)
from prefmo.mdp import (
    DEFAULT_HISTORY_CAP,
    DEFAULT_POLICY_CAP,
    DeterministicPolicy,
    MdpInstance,
    ScalarReward,
    SymbolicReward,
    VectorReward,
    enumerate_deterministic_policies,
    evaluate_policy,
    truncation_horizon,
    value_iteration,
)
from prefmo.momdp import (
    LinearScalarizer,
    aggregate,
    epsilon_cover_indices,
    pareto_frontier,
    vector_evaluate,
)
from prefmo.pbmdp import (
    HistoryPreference,
    Tournament,
    borda_scores,
    borda_winner,
    build_tournament,
    condorcet_winner,
    copeland_scores,
    copeland_winner,
    detect_cycles,
    duel_exact,
    duel_monte_carlo,
    optimal_mixed_policy,
    pareto_preference,
    probabilistic_dominance,
    scalarized_preference,
    utility_preference,
)
from prefmo.regret import chebyshev_optimal, minimax_regret, verify_lemma3
from prefmo.transforms import (
    RewardOrder,
    history_basis_matrix,
    ordered_history_transform,
    ordered_reward_transform,
    random_ordered_histories,
    sample_increasing,
    verify_lemma1,
    verify_lemma2,
)

DEFAULT_TOL = 1e-9


# --------------------------------------------------------------------------- helpers


def _policy(mdp: MdpInstance, text: str) -> DeterministicPolicy:
    """``a0,a1,...``: one action (name or index) per state."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != mdp.n_states:
        raise ValidationError(f"policy {text!r} lists {len(parts)} actions, instance has {mdp.n_states} states")
    acts = []
    for p in parts:
        if p in mdp.action_names:
            acts.append(mdp.action_names.index(p))
        elif p.isdigit() and int(p) < mdp.n_actions:
            acts.append(int(p))
        else:
            raise ValidationError(f"unknown action {p!r} in policy {text!r}")
    return DeterministicPolicy(tuple(acts))


def _policy_names(mdp: MdpInstance, pol: DeterministicPolicy) -> list[str]:
    return [mdp.action_names[a] for a in pol.actions]


def _state(mdp: MdpInstance, name: str | None) -> int | None:
    if name is None:
        return None
    if name in mdp.state_names:
        return mdp.state_names.index(name)
    if name.isdigit() and int(name) < mdp.n_states:
        return int(name)
    raise ValidationError(f"unknown state {name!r}")


def _preference(mdp: MdpInstance, spec: str | None) -> HistoryPreference:
    if spec is None:
        spec = "utility" if isinstance(mdp.reward, ScalarReward) else "pareto"
    if spec == "utility":
        return utility_preference(mdp)
    if spec == "pareto":
        return pareto_preference(mdp)
    if spec == "pareto-both":
        return pareto_preference(mdp, incomparable_as_equivalent=True)
    if spec.startswith("linear:"):
        w = [float(x) for x in spec[len("linear:"):].split(",")]
        return scalarized_preference(mdp, LinearScalarizer(w))
    raise ValidationError(f"unknown preference {spec!r}")


def _history_cap(args) -> int:
    return args.cap if args.cap is not None else DEFAULT_HISTORY_CAP


def _policy_cap(args) -> int:
    return args.cap if args.cap is not None else DEFAULT_POLICY_CAP


def _horizon(mdp: MdpInstance, args) -> int:
    return args.horizon if args.horizon is not None else truncation_horizon(mdp.gamma)


def _tournament_policies(mdp: MdpInstance, args) -> list[DeterministicPolicy]:
    if args.policy:
        return [_policy(mdp, p) for p in args.policy]
    return list(enumerate_deterministic_policies(mdp, _policy_cap(args)))


def _tournament(loaded: LoadedInstance, args) -> Tournament:
    mdp = loaded.mdp
    return build_tournament(
        mdp,
        _tournament_policies(mdp, args),
        _preference(mdp, args.preference),
        _horizon(mdp, args),
        method=args.method,
        n=args.n,
        seed=args.seed,
        start=_state(mdp, args.start),
        cap=_history_cap(args),
    )


def _tournament_block(mdp: MdpInstance, t: Tournament) -> dict:
    return {
        "policies": [_policy_names(mdp, p) for p in t.policies],
        "p": t.p,
        "q": t.q,
    }


def _transformed(loaded: LoadedInstance, mode: str | None = None):
    """Vector instance (and basis, if any) built from a symbolic instance and its preference block."""
    mdp, pref = loaded.mdp, loaded.preference or PreferenceSpec()
    if not isinstance(mdp.reward, SymbolicReward):
        raise ValidationError("transform needs an instance with a symbolic reward")
    if mode is None:
        mode = "ordered-histories" if pref.histories is not None else "ordered-rewards"
    if mode == "ordered-rewards":
        order = pref.order or RewardOrder.identity(mdp.reward.n_labels)
        return ordered_reward_transform(mdp, order), None, order
    if mode == "ordered-histories":
        if pref.histories is None:
            raise ValidationError("ordered-histories mode needs a preference.ordered_histories block")
        basis = history_basis_matrix(mdp, pref.histories)
        return ordered_history_transform(mdp, pref.histories, basis), basis, None
    raise ValidationError(f"unknown transform mode {mode!r}")


def _vector_instance(loaded: LoadedInstance) -> MdpInstance:
    if isinstance(loaded.mdp.reward, VectorReward):
        return loaded.mdp
    if isinstance(loaded.mdp.reward, SymbolicReward):
        return _transformed(loaded)[0]
    raise ValidationError("command needs a vector or symbolic reward")


# --------------------------------------------------------------------------- commands


def cmd_solve(loaded, args):
    mdp = loaded.mdp
    v, pol = value_iteration(mdp, args.tol)
    start = _state(mdp, args.start)
    print(f"value: {float(aggregate(mdp, v, start))!r}", file=sys.stderr)
    return {"values": dict(zip(mdp.state_names, v.tolist())), "policy": _policy_names(mdp, pol), "aggregate": float(aggregate(mdp, v, start))}


def cmd_evaluate(loaded, args):
    mdp = loaded.mdp
    pol = _policy(mdp, args.policy[0]) if args.policy else None
    if pol is None:
        raise ValidationError("evaluate needs --policy")
    start = _state(mdp, args.start)
    if isinstance(mdp.reward, ScalarReward):
        v = evaluate_policy(mdp, pol, args.tol)
    else:
        v = vector_evaluate(_vector_instance(loaded), pol, args.tol)
    return {"values": dict(zip(mdp.state_names, v.tolist())), "aggregate": aggregate(mdp, v, start), "policy": _policy_names(mdp, pol)}


def cmd_frontier(loaded, args):
    mdp = _vector_instance(loaded)
    fr = pareto_frontier(mdp, _state(mdp, args.start), _policy_cap(args), args.tol)
    return {"frontier": [{"policy": _policy_names(mdp, p), "vector": v} for p, v in fr]}


def cmd_cover(loaded, args):
    mdp = _vector_instance(loaded)
    fr = pareto_frontier(mdp, _state(mdp, args.start), _policy_cap(args), args.tol)
    idx = epsilon_cover_indices(fr.vectors, args.epsilon, args.cover_method)
    return {
        "epsilon": args.epsilon,
        "frontier_size": len(fr),
        "cover": [{"policy": _policy_names(mdp, fr.policies[i]), "vector": fr.vectors[i]} for i in idx],
    }


def cmd_duel(loaded, args):
    mdp = loaded.mdp
    if not args.policy or len(args.policy) != 2:
        raise ValidationError("duel needs exactly two --policy options")
    a, b = (_policy(mdp, p) for p in args.policy)
    pref = _preference(mdp, args.preference)
    H = _horizon(mdp, args)
    start = _state(mdp, args.start)
    if args.method == "exact":
        d = duel_exact(mdp, a, b, pref, H, start, _history_cap(args))
    elif args.method == "mc":
        d = duel_monte_carlo(mdp, a, b, pref, H, args.n, args.seed, start)
    else:
        raise ValidationError(f"unknown method {args.method!r}")
    print(f"p={d.p!r} q={d.q!r}", file=sys.stderr)
    return {"p": d.p, "q": d.q, "method": d.method, "horizon": H, "n": d.n, "verdict": probabilistic_dominance(d)}


def cmd_tournament(loaded, args):
    t = _tournament(loaded, args)
    return {"tournament": _tournament_block(loaded.mdp, t), "cycles": detect_cycles(t)}


def cmd_condorcet(loaded, args):
    t = _tournament(loaded, args)
    w = condorcet_winner(t)
    return {"tournament": _tournament_block(loaded.mdp, t), "winner": w}


def cmd_copeland(loaded, args):
    t = _tournament(loaded, args)
    return {"tournament": _tournament_block(loaded.mdp, t), "scores": copeland_scores(t), "winner": copeland_winner(t)}


def cmd_borda(loaded, args):
    t = _tournament(loaded, args)
    return {"tournament": _tournament_block(loaded.mdp, t), "scores": borda_scores(t), "winner": borda_winner(t)}


def cmd_mixed(loaded, args):
    t = _tournament(loaded, args)
    m = optimal_mixed_policy(t)
    return {"tournament": _tournament_block(loaded.mdp, t), "weights": m.weights, "game_value": m.value}


def cmd_transform(loaded, args):
    out, basis, order = _transformed(loaded, args.mode)
    res = {"mode": args.mode or ("ordered-histories" if basis is not None else "ordered-rewards"), "instance": instance_to_document(out)}
    if basis is not None:
        res["basis"] = {"H": basis.H, "H_inv": basis.H_inv, "condition": basis.condition}
    if order is not None:
        res["order"] = list(order.ascending)
    return res


def cmd_verify(loaded, args):
    rng = np.random.default_rng(args.seed)
    worst, rejected = 0.0, 0
    trials = args.trials
    if args.lemma == 1:
        for _ in range(trials):
            pb = acceptance._symbolic_instance(rng, 10, 4, 5, (0.5, 0.95))
            d = pb.reward.n_labels
            order = RewardOrder(tuple(rng.permutation(d)))
            x = np.empty(d)
            x[list(order.ascending)] = sample_increasing(d, 1, rng)[0]
            worst = max(worst, verify_lemma1(pb, order, x, acceptance._random_policy(pb, rng)))
        bound = 1e-8
    elif args.lemma == 2:
        done = 0
        while done < trials:
            pb = acceptance._symbolic_instance(rng, 10, 4, 5, (0.5, 0.95))
            try:
                ordered, basis = random_ordered_histories(pb, rng)
            except PrefmoError:
                rejected += 1
                continue
            x = basis.reward_values(sample_increasing(pb.reward.n_labels, 1, rng)[0])
            worst = max(worst, verify_lemma2(pb, ordered, x, acceptance._random_policy(pb, rng), basis=basis))
            done += 1
        bound = 1e-6
    else:
        for _ in range(trials):
            pb = acceptance._symbolic_instance(rng, 4, 3, 4, (0.5, 0.95))
            rep = verify_lemma3(ordered_reward_transform(pb), cap=_policy_cap(args))
            worst = max(worst, rep.lp_gap, rep.max_objective_gap)
            if not (rep.argmin_equal and rep.lp_not_worse):
                worst = max(worst, np.inf)
        bound = 1e-8
    ok = bool(worst <= bound)
    print(f"max residual: {worst!r} (bound {bound:g}) {'ok' if ok else 'FAILED'}", file=sys.stderr)
    return {"lemma": args.lemma, "trials": trials, "max_residual": worst if np.isfinite(worst) else None, "bound": bound, "passed": ok, "rejected_instances": rejected}


def cmd_chebyshev(loaded, args):
    mdp = _vector_instance(loaded)
    sol = chebyshev_optimal(mdp, _state(mdp, args.start))
    return {
        "regret": sol.regret,
        "ideal": sol.ideal.values,
        "value": sol.value,
        "active": list(sol.active),
        "policy": sol.policy.probs,
        "occupancy": sol.occupancy,
    }


def cmd_regret(loaded, args):
    mdp = _vector_instance(loaded)
    start = _state(mdp, args.start)
    z, sol = minimax_regret(mdp, start, "simplex")
    zh, _ = minimax_regret(mdp, start, "hypercube")
    return {"regret": z, "hypercube_regret": zh, "value": sol.value, "policy": sol.policy.probs, "active_vertices": list(sol.active)}


def cmd_elicit(loaded, args):
    if args.oracle is None:
        raise ValidationError("elicit needs --oracle")
    oracle_doc = load_oracle(args.oracle, args.strict)
    if isinstance(loaded.mdp.reward, SymbolicReward):
        mdp, basis, order = _transformed(loaded)
        if oracle_doc.true_values is None:
            raise ValidationError("symbolic instances need an oracle document with true_values")
        x = oracle_doc.true_values
        if order is not None:
            if not order.is_admissible(x):
                raise ValidationError("oracle true_values are not increasing along the instance's reward order")
            x = x[list(order.ascending)]
        oracle = SimulatedOracle.from_reward_values(x, basis)
    elif isinstance(loaded.mdp.reward, VectorReward):
        mdp = loaded.mdp
        if oracle_doc.weights is None:
            raise ValidationError("vector instances need an oracle document with weights")
        oracle = SimulatedOracle(oracle_doc.weights)
    else:
        raise ValidationError("elicit needs a vector or symbolic reward")
    res = elicit_loop(mdp, args.epsilon, oracle, args.max_queries, _state(mdp, args.start), _policy_cap(args))
    return {
        "recommended_policy": _policy_names(mdp, res.policy),
        "value": res.value,
        "queries": [
            {"first": _policy_names(mdp, res.cover_policies[q.first]), "second": _policy_names(mdp, res.cover_policies[q.second]), "prefers_first": a}
            for q, a in zip(res.queries, res.answers)
        ],
        "n_queries": res.n_queries,
        "cover_size": len(res.cover_vectors),
        "cuts": res.polytope.cuts,
    }


def cmd_selftest(loaded, args):
    numbers = tuple(int(x) for x in args.criteria.split(",")) if args.criteria else tuple(acceptance.CRITERIA)
    results = acceptance.run_selftest(args.seed, numbers)
    for r in results:
        print(r.line(), file=sys.stderr)
    return {"criteria": [r.to_dict() for r in results], "all_passed": all(r.passed for r in results)}


COMMANDS = {
    "solve": (cmd_solve, True),
    "evaluate": (cmd_evaluate, True),
    "frontier": (cmd_frontier, True),
    "cover": (cmd_cover, True),
    "duel": (cmd_duel, True),
    "tournament": (cmd_tournament, True),
    "condorcet": (cmd_condorcet, True),
    "copeland": (cmd_copeland, True),
    "borda": (cmd_borda, True),
    "mixed": (cmd_mixed, True),
    "transform": (cmd_transform, True),
    "verify": (cmd_verify, False),
    "chebyshev": (cmd_chebyshev, True),
    "regret": (cmd_regret, True),
    "elicit": (cmd_elicit, True),
    "selftest": (cmd_selftest, False),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="evaluation tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--cap", type=int, default=None, help="enumeration cap (default 1e5 policies / 1e6 histories)")
    common.add_argument("--out", type=Path, default=None, help="write the result document here instead of stdout")
    common.add_argument(
        "--strict", action=argparse.BooleanOptionalAction, default=True, help="reject unknown document fields (default); --no-strict warns"
    )
    common.add_argument("--timing", action="store_true", help="record wall time (makes output non-reproducible)")

    parser = argparse.ArgumentParser(prog="prefmo", description="Preference-based and multiobjective MDP toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs_instance) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common])
        if needs_instance:
            p.add_argument("instance", type=Path, help="instance document (JSON)")
            p.add_argument("--start", default=None, help="start state (default: initial distribution)")
        if name in ("evaluate", "duel", "tournament", "condorcet", "copeland", "borda", "mixed"):
            p.add_argument("--policy", action="append", help="comma-separated action per state; repeatable")
        if name in ("duel", "tournament", "condorcet", "copeland", "borda", "mixed"):
            p.add_argument("--horizon", type=int, default=None, help="history length (default: truncation rule)")
            p.add_argument("--method", choices=("exact", "mc"), default="exact")
            p.add_argument("--n", type=int, default=10_000, help="Monte Carlo sample pairs")
            p.add_argument("--preference", default=None, help="utility | pareto | pareto-both | linear:w1,w2,...")
        if name == "cover":
            p.add_argument("--epsilon", type=float, required=True)
            p.add_argument("--cover-method", choices=("minimum", "greedy"), default="minimum")
        if name == "transform":
            p.add_argument("--mode", choices=("ordered-rewards", "ordered-histories"), default=None)
        if name == "verify":
            p.add_argument("--lemma", type=int, choices=(1, 2, 3), required=True)
            p.add_argument("--trials", type=int, default=100)
        if name == "elicit":
            p.add_argument("--oracle", type=Path, default=None, help="oracle document with the hidden values")
            p.add_argument("--epsilon", type=float, default=0.1)
            p.add_argument("--max-queries", type=int, default=None)
        if name == "selftest":
            p.add_argument("--criteria", default=None, help="comma-separated criterion numbers (default: all)")
    return parser


def _echo(argv: Sequence[str]) -> list[str]:
    """Command line without the output path, which must not change the result bytes."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a == "--out":
            skip = True
        elif not a.startswith("--out="):
            out.append(a)
    return out


def run(argv: Sequence[str]) -> tuple[int, str]:
    """Run one command; returns the exit code and the result text (empty if written to ``--out``).

    Errors are reported on stderr.
    """
    parser = build_parser()
    args = parser.parse_args(list(argv))
    func, needs_instance = COMMANDS[args.command]
    t0 = time.perf_counter()
    try:
        if args.cap is not None and args.cap < 1:
            raise ValidationError("--cap must be positive")
        loaded = load_instance(args.instance, args.strict) if needs_instance else None
        outputs = func(loaded, args)
    except PrefmoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code, ""
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ValidationError.exit_code, ""
    tolerances = {"tol": args.tol, "cap": args.cap}
    doc = ResultDocument(
        command=_echo(argv),
        input_digest=loaded.digest if loaded is not None else None,
        seed=args.seed,
        tolerances=tolerances,
        outputs=outputs,
        wall_time=time.perf_counter() - t0 if args.timing else None,
    )
    text = emit_result(doc, args.out)
    code = 0
    if args.command == "selftest" and not outputs["all_passed"]:
        code = 1
    return code, ("" if args.out is not None else text)


def main(argv: Sequence[str] | None = None) -> int:
    code, text = run(sys.argv[1:] if argv is None else argv)
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
