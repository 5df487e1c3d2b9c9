from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from qgraph.cli import main


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


SPACE = {"blocks": [{"label": "a", "dim": 2, "rho": [[[2, 0], [0, 0]], [[0, 0], [0.5, 0]]]},
                    {"label": "b", "rho": [1.0]}]}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_space_check(tmp_path, capsys):
    code, out, _ = run(["space", "check", write(tmp_path, "s.json", SPACE), "--seed", "3"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["seed"] == 3
    check = next(c for c in rep["checks"] if c["name"] == "mm_star_identity")
    assert check["pass"] and check["deviation"] < 1e-12
    assert abs(rep["result"]["weight_of_unit"] - 7.25) < 1e-12


def test_space_check_scaled_weight_fails(tmp_path, capsys):
    space = {"blocks": [{"label": "a", "rho": [2.0, 0.5], "scale": 0.5}]}
    code, out, _ = run(["space", "check", write(tmp_path, "s.json", space)], capsys)
    assert code == 1
    assert abs(json.loads(out)["result"]["delta_squared"]["a"] - 2.0) < 1e-12


def test_adjacency_verify_oblique_idempotent(tmp_path, capsys):
    K = np.outer([1, 0, 0, 0], [1, 1, 0, 0]).tolist()
    adj = {"space": {"blocks": [{"label": "a", "rho": [1, 1]}]}, "choi": {"a:a": K}}
    code, out, _ = run(["adjacency", "verify", write(tmp_path, "adj.json", adj)], capsys)
    assert code == 1
    assert '"completely_positive": false' in out
    rep = json.loads(out)
    assert rep["result"]["classification"]["schur_idempotent"] is True


def test_adjacency_verify_classical(tmp_path, capsys):
    adj = {"classical": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]}
    code, out, _ = run(["adjacency", "verify", write(tmp_path, "k3.json", adj),
                        "--require", "schur_idempotent,completely_positive,kms_symmetric,loop_free"], capsys)
    assert code == 0
    assert json.loads(out)["result"]["is_quantum_graph"]


def test_adjacency_convert_round_trip(tmp_path, capsys):
    adj = {"space": SPACE, "choi": {"a:a": np.eye(4).tolist(), "b:a": np.eye(2).tolist(),
                                    "a:b": np.eye(2).tolist(), "b:b": [[1]]}}
    path = write(tmp_path, "c.json", adj)
    code, out, _ = run(["adjacency", "convert", path, "--to", "bimodule"], capsys)
    assert code == 0
    rep = json.loads(out)["result"]
    assert len(rep["bimodule"]["parts"]["a:a"]) == 4
    again = {"space": rep["space"], "bimodule": rep["bimodule"]}
    code, out, _ = run(["adjacency", "convert", write(tmp_path, "v.json", again), "--to", "choi"], capsys)
    choi = json.loads(out)["result"]["choi"]
    assert code == 0 and np.abs(np.array(choi["a:a"]) - np.eye(4)).max() < 1e-9
    code, out, _ = run(["adjacency", "convert", path, "--to", "map"], capsys)
    assert code == 0 and set(json.loads(out)["result"]["maps"]) == {"a:a", "a:b", "b:a", "b:b"}


def test_malformed_json_reports_position(tmp_path, capsys):
    code, _, err = run(["space", "check", write(tmp_path, "bad.json", '{"blocks": [\n  {"rho": [1,]}\n]}')], capsys)
    assert code == 2
    msg = json.loads(err)["message"]
    assert "line 2" in msg and "column" in msg


def test_bad_inputs(tmp_path, capsys, monkeypatch):
    path = write(tmp_path, "s.json", SPACE)
    assert run(["space", "check", path, "--tol", "1"], capsys)[0] == 2
    assert run(["space", "check", path, "--tol", "1e-20"], capsys)[0] == 2
    monkeypatch.setenv("QGRAPH_TOL", "1e-2")
    assert run(["space", "check", path], capsys)[0] == 2
    monkeypatch.setenv("QGRAPH_TOL", "1e-8")
    assert run(["space", "check", path], capsys)[0] == 0
    assert run(["space", "check", str(tmp_path / "missing.json")], capsys)[0] == 2
    bad_rho = {"blocks": [{"label": "a", "rho": [1.0, -1.0]}]}
    assert run(["space", "check", write(tmp_path, "r.json", bad_rho)], capsys)[0] == 2
    assert run(["cayley", "growth", "--dual", "su_q2", "--q", "3", "--gen", "1"], capsys)[0] == 2
    assert run(["cayley", "growth", "--dual", "nope", "--gen", "1"], capsys)[0] == 2
    assert run(["cayley", "growth", "--dual", "su2", "--gen", "x"], capsys)[0] == 2
    assert run(["no-such-verb"], capsys)[0] == 2


def test_growth_csv(tmp_path, capsys):
    out_csv = tmp_path / "g.csv"
    code, out, _ = run(["cayley", "growth", "--dual", "su_q2", "--q", "1.0", "--gen", "1", "--horizon", "10",
                        "--csv", str(out_csv)], capsys)
    assert code == 0
    assert json.loads(out)["result"]["verdict"]["verdict"] == "subexponential"
    rows = list(csv.DictReader(out_csv.open()))
    assert list(rows[0]) == ["n", "ball_size_labels", "a_n", "a_n_pow_inv_n"]
    assert float(rows[10]["a_n"]) == 506 and rows[10]["ball_size_labels"] == "11"
    code, out, _ = run(["cayley", "growth", "--dual", "su_q2", "--q", "1.0", "--gen", "1", "--horizon", "10",
                        "--format", "csv"], capsys)
    assert code == 0 and out.splitlines()[-1].startswith("10,11,506.0,")


def test_growth_deterministic(tmp_path, capsys):
    argv = ["cayley", "growth", "--dual", "free", "--gen", "a;A;b;B", "--horizon", "8"]
    assert run(argv, capsys)[1] == run(argv, capsys)[1]


def test_cayley_build(capsys):
    code, out, _ = run(["cayley", "build", "--dual", "su_q2", "--q", "0.5", "--gen", "1", "--window", "8"], capsys)
    rep = json.loads(out)
    assert code == 0 and all(c["pass"] for c in rep["checks"])
    assert abs(rep["result"]["generator"]["degree"] - 6.25) < 1e-12
    code, out, _ = run(["cayley", "build", "--dual", "su2", "--gen", "0;1"], capsys)
    assert code == 1 and "loops" in out


def test_cayley_folner_bilipschitz_walk(capsys):
    code, out, _ = run(["cayley", "folner", "--dual", "z", "--gen", "1;-1", "--horizon", "40"], capsys)
    assert code == 0 and json.loads(out)["result"]["folner"]["radius"] == 10
    code, out, _ = run(["cayley", "bilipschitz", "--dual", "z", "--gen", "1;-1", "--gen2", "1;-1;2;-2"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["result"]["bilipschitz"]["M"] == 2
    code, out, _ = run(["cayley", "walk", "--dual", "free", "--gen", "a;A;b;B", "--horizon", "40"], capsys)
    assert code == 0 and abs(json.loads(out)["result"]["walk"]["ratio"] - 0.866) < 0.01


def test_fourier_convolve_symmetry(tmp_path, capsys):
    code, out, _ = run(["fourier", "--dual", "dual", "--group", "S3"], capsys)
    assert code == 0 and json.loads(out)["result"]["dims"] == [1, 1, 2]
    x = write(tmp_path, "x.json", {"std": [[1, 2], [3, 4]], "sgn": [[1]]})
    code, out, _ = run(["fourier", "--dual", "dual", "--group", "S3", "--element", x], capsys)
    assert code == 0
    P = write(tmp_path, "p.json", {"std": [[1, 0], [0, 0]]})
    code, out, _ = run(["convolve", "--dual", "dual", "--group", "S3", P, x], capsys)
    assert code == 0
    code, out, _ = run(["symmetry", "--dual", "dual", "--group", "Z3", "--gen", "chi1"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["result"]["symmetry"]["kms"] is False
    code, out, _ = run(["fourier", "--dual", "su2"], capsys)
    assert code == 2


@pytest.mark.parametrize("argv", [["--version"], ["cayley", "growth", "--help"]])
def test_help_exits_cleanly(argv, capsys):
    assert main(argv) == 0
