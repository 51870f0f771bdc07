import copy
import json
from pathlib import Path

import pytest

from ceerlab.adversaries import (
    GAMES, ArityMismatch, Candidate, CandidateDiverged, Certificate, Defeated, Echo, LagViolation, Lagged,
    No4aryMax, Survived, build_game, builtin_names, context_for, interleave, lag_audit, load_table_candidate,
    play, resolve_candidate, run_adversary_scenario, validate_certificate,
)
from ceerlab.harness import Trace, load_scenario, parse_scenario
from ceerlab.universe import ParseError, Stream

SHIPPED = Path(__file__).resolve().parents[1] / "src" / "ceerlab" / "scenarios"


def game_scenario(adversary, **extra):
    body = {"schema": "ceerlab/1", "adversary": adversary, "horizon": 4000, "window": 400}
    if adversary == "adv_infclasses":
        body.update(relation={"table": [[0, 1], [2, 3]]}, params={"z": [0, 2]})
    body.update(extra)
    return parse_scenario(body)


def setup(adversary, candidate, **extra):
    sc = game_scenario(adversary, **extra)
    ctx = context_for(sc.adversary, sc.params, sc)
    if isinstance(candidate, str):
        candidate = resolve_candidate(candidate, ctx)
    return build_game(sc, candidate, ctx, Trace()), candidate


# ------------------------------------------------------------ lagged reads

def test_lagged_view_refuses_the_current_stage():
    st = Stream()
    st.add(0, 4)
    st.add(3, 9)
    view = Lagged(st, 2)
    assert view.snapshot() == {4}
    assert view.between(-1) == [4]
    with pytest.raises(LagViolation):
        view.snapshot(3)


def test_echo_trails_its_source_by_one_stage():
    src = Stream()
    for s, x in ((0, 5), (1, 2), (4, 7)):
        src.add(s, x)
    echo, out = Echo([0]), Stream()
    for s in range(8):
        for x in echo.step(s, [Lagged(src, s - 1)])[0]:
            out.add(s, x)
    assert out.events() == [(1, 5), (2, 2), (5, 7)]


def test_silent_inputs_give_a_silent_fixed_point():
    ident = Candidate("identity", 2, image=lambda c, i: c[i], spawn=lambda call: Echo([0, 1]))
    game, _ = setup("adv_max_to_min_binary", ident)
    game.step = lambda s, outputs: None
    run = interleave(game, ident, 300)
    assert run.outputs and all(st.snapshot() == frozenset() for st in run.outputs.values())


def test_builtin_games_never_read_the_current_stage():
    for adv in GAMES:
        for name in builtin_names(adv):
            report, trace = run_adversary_scenario(game_scenario(adv), f"builtin:{name}")
            assert lag_audit(trace) == [], (adv, name)
            assert report.extra["lag_violations"] == 0


# ------------------------------------------------------------ verdicts

def test_non_converging_index_map_is_reported():
    div = Candidate("div", 1, delay=lambda c, i: None if c[0] == 1 else 0, image=lambda c, i: 0,
                    spawn=lambda call: Echo([0]))
    game, cand = setup("adv_set_not_e3", div)
    verdict = play(game, cand).verdict
    assert isinstance(verdict, CandidateDiverged)
    assert verdict.call == (1,)
    assert "had not converged" in verdict.describe()


def test_survival_is_worded_as_inconclusive():
    text = Survived(4000).describe()
    assert "4000" in text and "not a proof" in text


def test_every_builtin_is_defeated_with_a_valid_certificate():
    for adv in GAMES:
        names = builtin_names(adv)
        assert len(names) >= 2
        for name in names:
            report, _ = run_adversary_scenario(game_scenario(adv), f"builtin:{name}")
            assert isinstance(report.verdict, Defeated), (adv, name, report.verdict)
            assert report.verdict.stage < 4000
            assert report.extra["validated"] and report.audits == []


def test_nearest_block_loses_the_pigeonhole_quickly():
    report, _ = run_adversary_scenario(load_scenario(SHIPPED / "game_pigeonhole.json"))
    assert isinstance(report.verdict, Defeated) and report.verdict.stage <= 200


def test_pigeonhole_branches():
    game, cand = setup("adv_pigeonhole", "builtin:collapse")
    run = play(game, cand)
    assert [game.inputs[l].snapshot() for l in game.labels] == [{0}, {1}, {2}, {3}]
    assert run.verdict.certificate.witnesses["lhs"]["claim"] is False
    game, cand = setup("adv_pigeonhole", "builtin:split")
    run = play(game, cand)
    assert all(game.inputs[l].snapshot() == frozenset() for l in game.labels)
    assert run.verdict.certificate.witnesses["lhs"]["claim"] is True


def test_slice_branches():
    game, cand = setup("adv_finitary_slice", "builtin:one_block")
    assert play(game, cand).verdict.certificate.witnesses["lhs"]["claim"] is False
    game, cand = setup("adv_finitary_slice", "builtin:scatter")
    assert play(game, cand).verdict.certificate.witnesses["lhs"]["claim"] is True


def test_infclasses_branches():
    game, cand = setup("adv_infclasses", "builtin:one_class")
    cert = play(game, cand).verdict.certificate
    assert cert.pair == ("a", "c") and cert.witnesses["rhs"]["claim"] is True
    game, cand = setup("adv_infclasses", "builtin:two_classes")
    cert = play(game, cand).verdict.certificate
    assert cert.witnesses["lhs"]["claim"] is True and cert.witnesses["rhs"]["claim"] is False


# ------------------------------------------------------------ four-argument max game

def test_four_argument_game_starts_from_the_fixed_sets():
    game, cand = setup("adv_no4ary_emax", "builtin:ternary_as_4ary")
    interleave(game, cand, 40)
    init = next(r.stage for r in game.trace if r.rule == "init")
    start = {l: game.inputs[l].snapshot(init) for l in game.labels}
    assert start == {"i": {0}, "j": {0, 2}, "k": {1}, "l": {1, 3}}


def test_four_argument_game_keeps_parity_apart():
    for name in builtin_names("adv_no4ary_emax"):
        game, cand = setup("adv_no4ary_emax", f"builtin:{name}")
        play(game, cand)
        assert game.audits == []
        assert all(x % 2 == 0 for l in "ij" for x in game.inputs[l].snapshot())
        assert all(x % 2 == 1 for l in "kl" for x in game.inputs[l].snapshot())
        assert isinstance(game, No4aryMax)


def test_identical_outputs_lose_on_the_first_pair():
    game, cand = setup("adv_no4ary_emax", "builtin:identical")
    cert = play(game, cand).verdict.certificate
    assert cert.pair == ("i", "j")


def test_ternary_reference_is_refused_by_arity():
    with pytest.raises(ArityMismatch, match="arity mismatch"):
        run_adversary_scenario(game_scenario("adv_no4ary_emax"), "builtin:eqce_to_emax_ternary")
    assert issubclass(ArityMismatch, ParseError)


# ------------------------------------------------------------ certificates

def _certificates():
    for adv in GAMES:
        for name in builtin_names(adv):
            report, _ = run_adversary_scenario(game_scenario(adv), f"builtin:{name}")
            yield adv, name, report.verdict.certificate.to_dict()


def test_certificates_survive_a_json_round_trip():
    for adv, name, cert in _certificates():
        stored = json.loads(json.dumps(cert))
        assert validate_certificate(stored), (adv, name)
        assert Certificate.from_dict(stored).pair == tuple(cert["pair"])


def test_tampered_certificates_are_rejected():
    for adv, name, cert in _certificates():
        flipped = copy.deepcopy(cert)
        flipped["witnesses"]["lhs"]["claim"] = not flipped["witnesses"]["lhs"]["claim"]
        assert not validate_certificate(flipped), (adv, name)
        mute = copy.deepcopy(cert)
        mute["witnesses"]["rhs"] = mute["witnesses"]["lhs"]
        mute["rhs_relation"] = mute["lhs_relation"]
        assert not validate_certificate(mute), (adv, name)
        gone = copy.deepcopy(cert)
        del gone["witnesses"]["horizon"]
        assert not validate_certificate(gone)


# ------------------------------------------------------------ table candidates

def test_table_candidate_plays_like_a_builtin(tmp_path):
    p = tmp_path / "flat.json"
    p.write_text(json.dumps({"arity": 2, "images": [0, 1], "delays": 1,
                             "outputs": [{"kind": "finite", "elems": [0]}, {"kind": "finite", "elems": [0]}]}))
    cand = load_table_candidate(p)
    assert (cand.arity, cand.kind, cand.name) == (2, "table", "flat")
    report, _ = run_adversary_scenario(game_scenario("adv_max_to_min_binary"), f"table:{p}")
    assert isinstance(report.verdict, Defeated) and report.extra["validated"]


def test_table_candidate_that_never_converges(tmp_path):
    p = tmp_path / "stuck.json"
    p.write_text(json.dumps({"arity": 2, "delays": [0, None], "outputs": [{"echo": 0}, {"echo": 1}]}))
    report, _ = run_adversary_scenario(game_scenario("adv_max_to_min_binary"), f"table:{p}")
    assert isinstance(report.verdict, CandidateDiverged) and report.verdict.output == 1


def test_malformed_table_candidates(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"images": [0]}))
    with pytest.raises(ParseError, match="arity"):
        load_table_candidate(p)
    p.write_text(json.dumps({"arity": 2, "outputs": [{"kind": "all"}]}))
    with pytest.raises(ParseError, match="outputs lists 1"):
        load_table_candidate(p)
    with pytest.raises(ParseError, match="file not found"):
        load_table_candidate(tmp_path / "none.json")
    with pytest.raises(ParseError, match="unknown builtin"):
        run_adversary_scenario(game_scenario("adv_set_not_e3"), "builtin:nope")
    with pytest.raises(ParseError, match="selector"):
        run_adversary_scenario(game_scenario("adv_set_not_e3"), "magic")
