import json
from fractions import Fraction

import pytest

from sat2csp.cli import main
from sat2csp.formula import eval_fraction, parse_dimacs
from sat2csp.params import ReductionParams
from sat2csp.redblue import RedBlueGraph


def _run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def workdir(tmp_path):
    assert _run("gen", "--num-vars", 9, "--num-clauses", 9, "--seed", 1,
                "--out", tmp_path / "f.cnf", "--planted-out", tmp_path / "p.json") == 0
    assert _run("sets", "--m", 9, "--k", 3, "--alpha", "1/2", "--seed", 1, "--out", tmp_path / "s.json") == 0
    params = ReductionParams(alpha=Fraction(1, 2), gamma=Fraction(1, 4), mu=Fraction(1, 4),
                             zeta=Fraction(1, 16), ell=2, r=1, h=2, k=3)
    (tmp_path / "params.json").write_text(json.dumps(params.to_json()))
    return tmp_path


def test_gen_writes_planted_formula(workdir):
    f = parse_dimacs((workdir / "f.cnf").read_text())
    bits = json.loads((workdir / "p.json").read_text())["bits"]
    assert eval_fraction(f, bits) == 1


def test_reduce_solve_decode(workdir):
    w = workdir
    assert _run("reduce", "--cnf", w / "f.cnf", "--sets", w / "s.json", "--params", w / "params.json",
                "--out", w / "a.json", "--csp-out", w / "c.json") == 0
    assert _run("solve", "--instance", w / "c.json", "--out", w / "sol.json") == 0
    assert json.loads((w / "sol.json").read_text())["value"] == "1"
    assert _run("decode", "--artifact", w / "a.json", "--labeling", w / "sol.json", "--best-effort",
                "--out", w / "dec.json") == 0
    report = json.loads((w / "dec.json").read_text())
    assert report["status"] == "ok" and report["decoding_bound"]["holds"]


def test_decode_without_params_is_usage_error(workdir):
    w = workdir
    _run("reduce", "--cnf", w / "f.cnf", "--sets", w / "s.json", "--out", w / "a.json", "--csp-out", w / "c.json")
    _run("solve", "--instance", w / "c.json", "--out", w / "sol.json")
    assert _run("decode", "--artifact", w / "a.json", "--labeling", w / "sol.json") == 2


def test_sets_check_exit_codes(workdir):
    w = workdir
    ok = ["sets", "--check", w / "s.json", "--gamma", "1/4", "--mu", "1", "--eta", "1", "--ell", 2, "--r", 1, "--h", 2]
    assert _run(*ok) == 0
    strict = ["sets", "--check", w / "s.json", "--gamma", "1", "--mu", "0", "--eta", "0", "--ell", 2, "--r", 1, "--h", 2]
    assert _run(*strict) == 1


def test_dsn_subcommands(workdir):
    w = workdir
    (w / "c.json").write_text(json.dumps({
        "format": "csp2", "version": 1, "num_vertices": 2, "alphabets": [[0, 1], [0, 1]],
        "constraints": [{"u": 0, "v": 1, "kind": "pairs", "shape": [2, 2], "allowed": [[1, 0]]}]}))
    assert _run("dsn", "reduce", "--csp", w / "c.json", "--out", w / "d.json") == 0
    assert _run("dsn", "solve", "--dsn", w / "d.json", "--out", w / "ds.json") == 0
    assert json.loads((w / "ds.json").read_text())["cost"] == "1"


def test_graph_subcommands(tmp_path):
    g = RedBlueGraph.from_edges(3, [(0, 1), (1, 2)], [(0, 2)])
    (tmp_path / "g.json").write_text(json.dumps(g.to_json()))
    assert _run("walks", "--graph", tmp_path / "g.json", "--ell", 2, "--out", tmp_path / "w.json") == 0
    assert _run("transitivity", "--graph", tmp_path / "g.json", "--q", 1, "--ell", 2) == 0
    assert _run("transitivity", "--graph", tmp_path / "g.json", "--q", 0, "--ell", 2) == 1


def test_verify_lemmas_and_report(tmp_path):
    assert _run("verify-lemmas", "--seeds", 5, "--out", tmp_path / "l.json") == 0
    assert json.loads((tmp_path / "l.json").read_text())["status"] == "pass"
    assert _run("report", "--seed", 2, "--format", "csv", "--out", tmp_path / "r.csv") == 0
    assert (tmp_path / "r.csv").read_text().startswith("seed,")


def test_input_errors_exit_two(tmp_path):
    assert _run("reduce", "--cnf", tmp_path / "none.cnf", "--sets", tmp_path / "none.json") == 2
    assert _run("gen", "--num-vars", 2, "--num-clauses", 5) == 2
    assert _run("report", "--cnf", tmp_path / "none.cnf") == 2
    with pytest.raises(SystemExit) as exc:
        _run("bogus")
    assert exc.value.code == 2
