from __future__ import annotations

import copy
import json
import subprocess
import sys
from pathlib import Path

import pytest

from prefmo.cli import run

DATA = Path(__file__).resolve().parent.parent / "data"
ROLL = ",".join(["{}"] + ["die_a"] * 10)
DICE_POLICIES = [arg for d in ("die_a", "die_b", "die_c") for arg in ("--policy", ROLL.format(d))]


def data(name: str) -> str:
    return str(DATA / name)


def ok(argv):
    code, text = run(argv)
    assert code == 0, text
    return json.loads(text)


def write_json(path: Path, doc) -> str:
    path.write_text(json.dumps(doc))
    return str(path)


class TestCommands:
    def test_solve_one_state(self):
        out = ok(["solve", data("one_state.json")])["outputs"]
        assert out["aggregate"] == 2.0
        assert out["policy"] == ["a0"]

    def test_evaluate(self):
        out = ok(["evaluate", data("one_state.json"), "--policy", "a0", "--tol", "1e-12"])["outputs"]
        assert out["aggregate"] == pytest.approx(2.0, abs=1e-11)

    def test_evaluate_needs_one_policy(self):
        assert run(["evaluate", data("one_state.json")])[0] == 2

    def test_duel_dice(self):
        out = ok(["duel", data("dice.json"), "--start", "roll", "--horizon", "2", *DICE_POLICIES[:4]])["outputs"]
        assert out["p"] == pytest.approx(5 / 9, abs=1e-12)
        assert out["q"] == pytest.approx(4 / 9, abs=1e-12)
        assert out["verdict"] == "first"

    def test_duel_monte_carlo(self):
        argv = ["duel", data("dice.json"), "--start", "roll", "--horizon", "2", "--method", "mc", "--n", "20000", "--seed", "3"]
        out = ok(argv + DICE_POLICIES[:4])["outputs"]
        assert abs(out["p"] - 5 / 9) <= 3 * (5 / 9 * 4 / 9 / 20000) ** 0.5

    def test_tournament_and_voting(self):
        base = [data("dice.json"), "--start", "roll", "--horizon", "2", *DICE_POLICIES]
        t = ok(["tournament", *base])["outputs"]
        assert t["cycles"] == [[0, 1, 2]]
        assert ok(["condorcet", *base])["outputs"]["winner"] is None
        mixed = ok(["mixed", *base])["outputs"]
        assert mixed["weights"] == pytest.approx([1 / 3] * 3, abs=1e-6)
        assert ok(["copeland", *base])["outputs"]["winner"] is not None
        assert ok(["borda", *base])["outputs"]["winner"] is not None

    def test_frontier_and_cover(self):
        front = ok(["frontier", data("symmetric.json")])["outputs"]["frontier"]
        assert [f["vector"] for f in front] == [[0.0, 1.0], [1.0, 0.0]]
        cover = ok(["cover", data("symmetric.json"), "--epsilon", "0.1"])["outputs"]
        assert len(cover["cover"]) == 2

    def test_chebyshev_and_regret(self):
        cheb = ok(["chebyshev", data("symmetric.json")])["outputs"]
        assert cheb["regret"] == pytest.approx(0.5)
        assert cheb["policy"] == [[pytest.approx(0.5), pytest.approx(0.5)]]
        reg = ok(["regret", data("symmetric.json")])["outputs"]
        assert reg["regret"] == pytest.approx(0.5)

    @pytest.mark.parametrize("name", ["corridor_ordered_rewards.json", "corridor_ordered_histories.json"])
    def test_transform(self, name):
        out = ok(["transform", data(name)])["outputs"]
        assert out["instance"]["reward"]["kind"] == "vector"

    @pytest.mark.parametrize("lemma,bound", [(1, 1e-8), (2, 1e-6), (3, 1e-8)])
    def test_verify(self, lemma, bound):
        out = ok(["verify", "--lemma", str(lemma), "--trials", "20", "--seed", "1"])["outputs"]
        assert out["passed"]
        assert out["bound"] == bound
        assert out["max_residual"] <= bound

    def test_verify_lemma1_hundred_trials(self):
        out = ok(["verify", "--lemma", "1", "--trials", "100", "--seed", "1"])["outputs"]
        assert out["max_residual"] <= 1e-8

    def test_elicit_vector(self):
        out = ok(["elicit", data("symmetric.json"), "--oracle", data("two_objective_oracle.json")])["outputs"]
        assert out["recommended_policy"] == ["a1"]
        assert out["n_queries"] <= out["cover_size"] - 1

    def test_elicit_symbolic(self):
        out = ok(["elicit", data("corridor_ordered_rewards.json"), "--oracle", data("corridor_oracle.json")])["outputs"]
        assert out["recommended_policy"] == ["forward", "forward", "forward"]

    def test_selftest_subset(self):
        out = ok(["selftest", "--criteria", "5"])["outputs"]
        assert out["all_passed"]
        assert [c["number"] for c in out["criteria"]] == [5]


class TestExitCodes:
    def test_bad_probability_sum(self, tmp_path):
        doc = json.loads((DATA / "one_state.json").read_text())
        doc["transitions"][0]["prob"] = 0.9
        code, text = run(["solve", write_json(tmp_path / "bad.json", doc)])
        assert (code, text) == (2, "")

    def test_missing_file(self, tmp_path):
        assert run(["solve", str(tmp_path / "nope.json")])[0] == 2

    def test_wrong_reward_kind(self):
        assert run(["frontier", data("one_state.json")])[0] == 2

    def test_cap_exceeded(self):
        assert run(["frontier", data("symmetric.json"), "--cap", "1"])[0] == 3
        assert run(["tournament", data("dice.json"), "--horizon", "2"])[0] == 3

    def test_singular_basis_is_numerical(self, tmp_path):
        doc = json.loads((DATA / "corridor_ordered_histories.json").read_text())
        hs = doc["preference"]["ordered_histories"]
        hs[1] = copy.deepcopy(hs[2])
        assert run(["transform", write_json(tmp_path / "sing.json", doc)])[0] == 4

    def test_strict_flag(self, tmp_path):
        doc = json.loads((DATA / "one_state.json").read_text())
        doc["note"] = "extra"
        path = write_json(tmp_path / "extra.json", doc)
        assert run(["solve", path])[0] == 2
        with pytest.warns(UserWarning):
            assert run(["solve", path, "--no-strict"])[0] == 0

    def test_bad_cap(self):
        assert run(["solve", data("one_state.json"), "--cap", "0"])[0] == 2


class TestReproducibility:
    def test_same_bytes_twice(self):
        argv = ["duel", data("dice.json"), "--start", "roll", "--horizon", "2", "--method", "mc", "--n", "500", "--seed", "7"]
        argv += DICE_POLICIES[:4]
        assert run(argv) == run(argv)

    def test_out_file_matches_stdout(self, tmp_path):
        argv = ["chebyshev", data("symmetric.json")]
        _, text = run(argv)
        code, empty = run(argv + ["--out", str(tmp_path / "r.json")])
        assert (code, empty) == (0, "")
        assert (tmp_path / "r.json").read_text() == text

    def test_timing_is_opt_in(self):
        assert ok(["solve", data("one_state.json")])["wall_time"] is None
        assert ok(["solve", data("one_state.json"), "--timing"])["wall_time"] >= 0.0

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "prefmo", "solve", data("one_state.json")], capture_output=True, text=True, check=False
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["outputs"]["aggregate"] == 2.0
        assert "value: 2.0" in proc.stderr
