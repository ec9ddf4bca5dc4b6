import json

import pytest

from dnamp.amplitudes import amplitude, content_hash
from dnamp.harness import cli_main
from dnamp.harness.report import CheckReport, merge
from dnamp.harness.suites import (
    suite_annihilation,
    suite_commutators,
    suite_golden,
    suite_residues,
    suite_vanishing_instance,
    vanishing_system,
)


def _failing(rep):
    return [(it.desc, it.witness) for it in rep.items if not it.ok]


def test_report_json_round_trip():
    rep = CheckReport("demo")
    rep.add("good", True)
    rep.add("bad", False, "monomial e[1,2]")
    with rep.timed("raises") as slot:
        raise RuntimeError("boom")
    back = CheckReport.from_json(rep.to_json())
    assert back == rep
    assert not back.passed
    assert [it.status for it in back.items] == ["pass", "fail", "fail"]
    assert back.items[2].witness == "RuntimeError: boom"
    d = json.loads(rep.to_json())
    assert set(d) == {"suite", "items", "version", "content_hashes"}
    assert set(d["items"][0]) == {"desc", "status", "witness", "millis"}


def test_report_schema_rejects_bad_input():
    with pytest.raises(ValueError):
        CheckReport.from_dict({"suite": "x", "items": []})
    with pytest.raises(ValueError):
        CheckReport.from_dict({"suite": "x", "items": [{"desc": "a", "status": "maybe"}], "version": "0", "content_hashes": {}})


def test_failures_carry_witness():
    rep = CheckReport("demo")
    rep.add("bad", False)
    assert rep.items[0].witness


def test_merge():
    a, b = CheckReport("a"), CheckReport("b")
    a.add("x", True)
    b.add("y", False, "w")
    m = merge("ab", [a, b])
    assert [it.desc for it in m.items] == ["a: x", "b: y"]
    assert not m.passed


def test_suites_are_deterministic():
    r1 = suite_golden(4).to_json(timing=False)
    r2 = suite_golden(4).to_json(timing=False)
    assert r1 == r2
    assert "ratio 1/2" in r1


@pytest.mark.parametrize("theory", ["YM", "GR"])
def test_annihilation_n3(theory):
    rep = suite_annihilation(theory, 3)
    assert rep.passed, _failing(rep)
    assert len(rep.items) == 5 * 3 + 1


def test_annihilation_ym4():
    rep = suite_annihilation("YM", 4)
    assert rep.passed, _failing(rep)


def test_commutators_n3():
    for theory in ("YM", "GR"):
        rep = suite_commutators(3, theory)
        assert rep.passed, _failing(rep)


def test_commutator_family_examples_n4():
    rep = suite_commutators(4, "YM", families=("[X,A]", "[X,C]"))
    assert rep.passed, _failing(rep)
    assert any("[X,C]" in it.desc for it in rep.items)


def test_residues_counts():
    ym = suite_residues("YM", 4)
    assert ym.passed, _failing(ym)
    assert any(it.desc == "2 channels carry a pole" for it in ym.items)
    gr = suite_residues("GR", 4)
    assert gr.passed, _failing(gr)


def test_vanishing_instance():
    size, r = vanishing_system()
    assert size == 126 and r == 126
    size2, r2 = vanishing_system(use_x=False)
    assert size2 - r2 > 0
    assert suite_vanishing_instance().passed


def test_suite_preconditions():
    with pytest.raises(ValueError):
        suite_annihilation("YM", 6)
    with pytest.raises(ValueError):
        suite_residues("YM", 3)
    with pytest.raises(ValueError):
        suite_annihilation("QED", 3)


# -- CLI ----------------------------------------------------------------------

def test_cli_amp_prints_canonical_form(capsys):
    assert cli_main(["amp", "--theory", "ym", "--n", "4"]) == 0
    out = capsys.readouterr().out.strip()
    assert out == amplitude("YM", 4).serialize()
    assert cli_main(["amp", "--theory", "ym", "--n", "4"]) == 0
    assert capsys.readouterr().out.strip() == out


def test_cli_amp_json(capsys):
    assert cli_main(["amp", "--theory", "gr", "--n", "3", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["theory"] == "GR" and d["n"] == 3
    assert d["sha256"] == content_hash(d["value"])


def test_cli_amp_cache(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DNAMP_CACHE_DIR", str(tmp_path))
    assert cli_main(["amp", "--theory", "ym", "--n", "3", "--cache"]) == 0
    assert (tmp_path / "ym3.amp").exists()


def test_cli_check_golden(capsys):
    assert cli_main(["check", "golden", "--n", "4"]) == 0
    out = capsys.readouterr().out
    assert "YM4 is proportional to the reference form (ratio 1/2)" in out
    assert "GR4 is proportional to the reference form (ratio 1/2)" in out


def test_cli_check_json_round_trips(capsys):
    assert cli_main(["check", "vanishing", "--format", "json"]) == 0
    rep = CheckReport.from_json(capsys.readouterr().out)
    assert rep.passed


def test_cli_check_annihilate_selection(capsys):
    assert cli_main(["check", "annihilate", "--theory", "gr", "--n", "3", "--ops", "X,C", "--leg", "1"]) == 0
    out = capsys.readouterr().out
    assert "2/2 passed" in out


def test_cli_usage_errors(capsys):
    assert cli_main(["check", "golden", "--bogus"]) == 2
    assert cli_main(["frobnicate"]) == 2
    assert cli_main(["check", "annihilate", "--ops", "W"]) == 2
    assert cli_main(["eval", "--n", "4"]) == 2
    assert cli_main(["eval", "k[1,9]", "--n", "4"]) == 2


def test_cli_eval(capsys):
    assert cli_main(["eval", "k[1,2]+k[1,3]+k[1,4]", "--n", "4"]) == 0
    assert capsys.readouterr().out.strip() == "0"
    assert cli_main(["eval", "--amp", "ym", "--n", "4", "--seed", "42", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["seed"] == 42 and d["n"] == 4


@pytest.mark.slow
def test_cli_gr5_C_annihilates():
    assert cli_main(["check", "annihilate", "--theory", "gr", "--n", "5", "--ops", "C"]) == 0
