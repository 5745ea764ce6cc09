from __future__ import annotations

import csv
import io
import json
from fractions import Fraction

import pytest

from denseltc.cli import main, parse_seeds


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def h3(tmp_path):
    out = tmp_path / "h3"
    assert run("construct", "hadamard", "--k", 3, "--out", out) == 0
    return out


def pair(d):
    return ["--code", d / "code.json", "--hypergraph", d / "hypergraph.json"]


def test_parse_seeds():
    assert parse_seeds("0-3,7") == [0, 1, 2, 3, 7]
    assert parse_seeds("") == []
    with pytest.raises(ValueError):
        parse_seeds("5-2")


def test_construct_hadamard(h3):
    code = json.loads((h3 / "code.json").read_text())
    hg = json.loads((h3 / "hypergraph.json").read_text())
    receipt = json.loads((h3 / "receipt.json").read_text())
    assert code["n"] == 8 and len(hg["edges"]) == 7
    assert receipt["schema_version"] == 1 and all(receipt["checks"].values())


def test_construct_repetition(tmp_path):
    assert run("construct", "repetition", "--n", 8, "--q", 3, "--out", tmp_path) == 0
    assert len(json.loads((tmp_path / "hypergraph.json").read_text())["edges"]) == 56


def test_input_errors_exit_2(tmp_path, capsys, h3):
    assert run("construct", "bogus", "--out", tmp_path) == 2
    assert run("construct", "hadamard", "--k", 40, "--out", tmp_path) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert run("fix", "--code", tmp_path / "broken.json", "--hypergraph", h3 / "hypergraph.json") == 2
    assert run("fix", *pair(h3), "--seeds", "9-1") == 2
    assert run("nonsense") == 2
    err = capsys.readouterr().err
    assert "unknown family" in err


def test_mismatched_files_exit_2(tmp_path, h3):
    assert run("construct", "hadamard", "--k", 4, "--out", tmp_path / "h4") == 0
    args = ["--code", h3 / "code.json", "--hypergraph", tmp_path / "h4" / "hypergraph.json"]
    assert run("verify", *args) == 2


def test_fix_writes_reports(tmp_path, h3):
    out = tmp_path / "fix"
    assert run("fix", *pair(h3), "--seeds", "0-2", "--out", out) == 0
    summary = json.loads((out / "fix_summary.json").read_text())
    assert [r["seed"] for r in summary["runs"]] == [0, 1, 2]
    assert summary["all_halted"] and summary["median_F_size"] >= 3
    for s in range(3):
        rep = json.loads((out / f"fix_seed{s}.json").read_text())
        assert rep["schema_version"] == 1 and rep["halted"]
    assert run("verify", *pair(h3), "--report", out / "fix_seed1.json") == 0


def test_fix_not_halted_exit_3(tmp_path, h3):
    assert run("fix", *pair(h3), "--max-iter", 0, "--out", tmp_path) == 3


def test_transform_and_verify(tmp_path, h3):
    out = tmp_path / "dup"
    assert run("transform", "duplicate", *pair(h3), "--t", 2, "--out", out) == 0
    assert json.loads((out / "code.json").read_text())["n"] == 16
    assert run("verify", *pair(out)) == 0


def test_soundness_exhaustive(tmp_path, h3, capsys):
    assert run("soundness", *pair(h3), "--taus", "1/6", "--out", tmp_path) == 0
    prof = json.loads((tmp_path / "profile.json").read_text())
    assert prof["points"][0]["epsilon"] == "3/7"
    assert prof["points"][0]["witness"] == "11000000"


def test_soundness_sampled_zero_trials(tmp_path, h3):
    assert run("soundness", *pair(h3), "--mode", "sampled", "--trials", 0, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "profile.json").read_text())["points"][0]["vacuous"]


def test_soundness_exhaustive_too_large(tmp_path):
    assert run("construct", "hadamard", "--k", 5, "--out", tmp_path) == 0
    assert run("soundness", *pair(tmp_path), "--out", tmp_path) == 2


def read_rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_sweep_empty_seeds_is_header_only(tmp_path):
    assert run("sweep", "--values", "4-5", "--seeds", "", "--out", tmp_path) == 0
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 1


def test_sweep_duplicate_density(tmp_path):
    args = ["sweep", "--k", 3, "--transform", "duplicate", "--sweep", "t", "--values", "2-3"]
    assert run(*args, "--seeds", "0-1", "--out", tmp_path) == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert [(r["value"], r["seed"]) for r in rows] == [("2", "0"), ("2", "1"), ("3", "0"), ("3", "1")]
    for r in rows:
        t = int(r["value"])
        assert Fraction(r["density"]) == Fraction(7, 8) * t * t


def test_sweep_from_config(tmp_path):
    cfg = {
        "family": "hadamard",
        "sweep": "k",
        "values": [4, 5],
        "seeds": [0, 1],
        "overrides": {"max_iter": 64},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert run("sweep", "--config", tmp_path / "cfg.json", "--out", tmp_path) == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert len(rows) == 4 and all(r["halted"] == "1" for r in rows)
    (tmp_path / "bad.json").write_text(json.dumps({**cfg, "family": "nope"}))
    assert run("sweep", "--config", tmp_path / "bad.json", "--out", tmp_path) == 2


def test_sweep_not_halted_exit_3(tmp_path):
    assert run("sweep", "--values", "4", "--seeds", "0", "--max-iter", 0, "--out", tmp_path) == 3
