import json
import re
from pathlib import Path

import pytest

from ceerlab.adversaries import validate_certificate
from ceerlab.cli import EXPLAIN, main

FAILING = Path(__file__).parent / "fixtures" / "failing"


def digest(text):
    return re.search(r"digest ([0-9a-f]{64})", text).group(1)


def test_run_prints_the_pair_table(capsys):
    assert main(["run", "scenarios/pi02_k3.json"]) == 0
    out = capsys.readouterr()
    rows = re.findall(r"^\s+\((\d+), (\d+)\)\s+(\w+)\s+(\w+)\s+(\w+)$", out.out, re.M)
    assert [r[:2] for r in rows] == [("0", "1"), ("0", "2"), ("1", "2")]
    assert all(r[4] == "yes" for r in rows) and "PASS" in out.out
    assert "runtime" in out.err and "runtime" not in out.out


def test_run_missing_file(capsys):
    assert main(["run", "missing.json"]) == 2
    assert "file not found" in capsys.readouterr().err


def test_same_seed_prints_the_same_digest(capsys):
    assert main(["run", "scenarios/pi02_k5.json", "--seed", "7"]) == 0
    first = capsys.readouterr().out
    assert main(["run", "scenarios/pi02_k5.json", "--seed", "7"]) == 0
    assert first == capsys.readouterr().out
    assert digest(first)


def test_trace_is_opt_in(tmp_path, capsys):
    path = tmp_path / "trace.jsonl"
    assert main(["run", "scenarios/e3_binary_equal.json", "--trace", str(path)]) == 0
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert rows and {"stage", "actor", "rule"} <= set(rows[0])


def test_verify_rejects_games(capsys):
    assert main(["verify", "scenarios/game_pigeonhole.json"]) == 2
    assert main(["verify", "scenarios/min_to_max_sentinels.json"]) == 0


def test_adversary_prints_a_validated_certificate(tmp_path, capsys):
    cert = tmp_path / "cert.json"
    code = main(["adversary", "scenarios/game_set_not_e3.json", "--candidate", "builtin:constant",
                 "--certificate", str(cert)])
    out = capsys.readouterr().out
    assert code == 0
    assert "certificate:" in out and "certificate validated: yes" in out
    stored = json.loads(cert.read_text())
    assert set(stored) == {"pair", "lhs_relation", "rhs_relation", "witnesses"}
    assert validate_certificate(stored)


def test_adversary_against_the_four_argument_game(capsys):
    assert main(["adversary", "scenarios/game_no4ary_emax.json", "--candidate", "builtin:ternary_as_4ary"]) == 0


def test_adversary_arity_mismatch(capsys):
    code = main(["adversary", "scenarios/game_no4ary_emax.json", "--candidate", "builtin:eqce_to_emax_ternary"])
    assert code == 2
    assert "arity mismatch" in capsys.readouterr().err


def test_adversary_inconclusive_and_divergent_codes(tmp_path, capsys):
    assert main(["adversary", "scenarios/game_set_not_e3.json", "--horizon", "20", "--window", "3"]) == 3
    assert "Survived" in capsys.readouterr().out
    stuck = tmp_path / "stuck.json"
    stuck.write_text(json.dumps({"arity": 2, "delays": None}))
    assert main(["adversary", "scenarios/game_max_to_min.json", "--candidate", f"table:{stuck}"]) == 4
    assert "CandidateDiverged" in capsys.readouterr().out


def test_corpus_of_shipped_scenarios(capsys):
    assert main(["corpus", "--jobs", "2"]) == 0
    out = capsys.readouterr()
    assert re.search(r"(\d+)/\1 scenarios pass", out.out)
    assert re.search(r"\d+\.\d\ds", out.err)


def test_corpus_names_the_failing_fixture(capsys):
    assert main(["corpus", str(FAILING)]) == 1
    out = capsys.readouterr().out
    assert "failed: pi02_short_horizon" in out
    assert "pi02_k3" not in out.split("failed:")[1]


def test_corpus_of_an_empty_directory(tmp_path, capsys):
    assert main(["corpus", str(tmp_path)]) == 2
    assert "no scenarios" in capsys.readouterr().err


def test_explain_every_entry(capsys):
    for name in EXPLAIN:
        assert main(["explain", name]) == 0
        assert capsys.readouterr().out.startswith(name)
    assert main(["explain", "nothing"]) == 2


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["run", "x.json", "--horizon", "0"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2
