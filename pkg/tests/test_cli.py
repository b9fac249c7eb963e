import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from schrograph.cli import main
from schrograph.fixtures import get_fixture
from schrograph.io import instance_to_json


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_scatter_free_line_csv(capsys):
    code, out, _ = run(capsys, "scatter", "fixture:free_line", "--range", "-1.9:1.9:50")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# scatter-csv v1; k=2")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 50
    for r in rows:
        assert r["status"] == "ok" and float(r["unitarity"]) <= 1e-10
        S = np.array([[complex(float(r[f"S{i}{j}_re"]), float(r[f"S{i}{j}_im"])) for j in (1, 2)] for i in (1, 2)])
        assert abs(S[0, 0]) <= 1e-10 and abs(S[1, 1]) <= 1e-10
        assert abs(abs(S[0, 1]) - 1) <= 1e-10


def test_scatter_json_and_domain_rows(capsys):
    code, out, _ = run(capsys, "scatter", "fixture:free_line", "--lambda", "2.5", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["results"][0]["status"] == "domain" and rep["warnings"]


def test_exceptional_triangle_formula(capsys):
    code, out, _ = run(capsys, "exceptional", "fixture:triangle_tail_exceptional")
    assert code == 0
    rep = json.loads(out)
    (ev,) = rep["results"]
    a, b, c, w = 1.0, 2.0, 1.0, 2.0
    assert abs(ev["lambda"] - (w - b * c / a)) <= 1e-10
    assert rep["subcommand"] == "exceptional" and len(rep["config_hash"]) == 16


def test_reports_are_byte_identical(capsys, tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"r{i}.json"
        assert main(["perturb", "fixture:triangle_tail_z2", "--mag", "0.01", "--trials", "10",
                     "--seed", "3", "-o", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_malformed_json_exit_1(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"vertices": [}')
    code, _, err = run(capsys, "bound", str(p))
    assert code == 1 and "line 1, column" in err


def test_schema_error_exit_1(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"vertices": [{"id": 0}], "edges": [{"id": 0, "u": 0, "v": 9}]}))
    code, _, err = run(capsys, "bound", str(p))
    assert code == 1 and "edges[0].v" in err


@pytest.mark.parametrize("argv", [
    ["scatter", "fixture:nope", "--lambda", "0.1"],
    ["scatter", "fixture:free_line", "--range", "1:2:0"],
    ["scatter", "fixture:free_line"],
    ["spectrum", "fixture:free_line", "--window", "3:2"],
    ["singular", "fixture:free_line", "--range", "x"],
    ["bound", "fixture:free_line", "--assert-tol", "-1"],
    ["nosuch"],
])
def test_input_errors_exit_1(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_assertion_failure_exit_2(capsys, tmp_path):
    A, B = tmp_path / "A.json", tmp_path / "B.json"
    A.write_text("[[0, 1], [-1, 0]]")
    B.write_text("[[1, 0], [0, 2]]")
    code, out, _ = run(capsys, "fermion", "--A", str(A), "--B", str(B), "--oracle")
    assert code == 0 and json.loads(out)["results"]["max_deviation"] <= 1e-9
    # an absurd tolerance makes the same identity fail
    code, out, err = run(capsys, "fermion", "--A", str(A), "--B", str(B), "--oracle", "--assert-tol", "1e-300")
    dev = json.loads(out)["results"]["max_deviation"]
    assert (code == 2 and "check failed" in err) if dev > 1e-300 else code == 0


def test_incompatible_factorization_exit_2(capsys, tmp_path):
    doc = {"vertices": [{"id": i} for i in range(5)],
           "edges": [{"id": f"e{i}", "u": 0, "v": i} for i in range(1, 5)],
           "d": [{"r": f"e{i}", "s": f"e{j}", "value": 2.0 if (i, j) == (1, 2) else 1.0}
                 for i in range(1, 5) for j in range(i + 1, 5)]}
    doc["edges"] = [dict(e, V_R=0.0) for e in doc["edges"]]
    p = tmp_path / "star.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "factorize", str(p), "--mode", "edge", "--allow-invalid")
    assert code == 2 and "compatibility" in json.loads(out)["results"]


def test_check_wronskian_generate(capsys):
    code, out, _ = run(capsys, "check-wronskian", "fixture:triangle_two_tails_joint", "--generate", "eig",
                       "--lambda", "0.3")
    rep = json.loads(out)
    assert code == 0 and rep["results"]["cycle_residual"] <= 1e-9
    assert abs(rep["results"]["alpha_sum"]) <= 1e-9


def test_spectrum_and_singular(capsys):
    code, out, _ = run(capsys, "spectrum", "fixture:triangle_tail_deep", "--window", "2:15")
    assert code == 0 and json.loads(out)["results"]["normal"]
    code, out, _ = run(capsys, "singular", "fixture:triangle_two_tails_joint", "--range", "-1.9:1.9:400")
    lams = sorted(r["lambda"] for r in json.loads(out)["results"])
    assert code == 0 and np.allclose(lams, sorted(np.roots([1, -1, -0.25]).real), atol=1e-10)


def test_factorize_vertex_tree(capsys, tmp_path):
    sub = tmp_path / "sub.json"
    sub.write_text(json.dumps({"vertices": ["0", "A", "B"], "root": "0"}))
    inst = get_fixture("free_line")
    doc = instance_to_json(inst)
    doc.update(vertices=[{"id": v} for v in ("0", "A", "B")],
               edges=[{"id": "x", "u": "0", "v": "A"}, {"id": "y", "u": "A", "v": "B"}], tails=[])
    g = tmp_path / "path.json"
    g.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "factorize", str(g), "--mode", "vertex", "--subtree", str(sub), "--C", "3",
                         "--allow-invalid")
    assert code == 0 and json.loads(out)["results"]["reconstruct_residual"] <= 1e-10


def test_bound_and_fixtures(capsys):
    code, out, _ = run(capsys, "bound", "fixture:k4_tails")
    assert code == 0 and json.loads(out)["results"]["vertex"]["flag"]
    code, out, _ = run(capsys, "fixtures")
    assert code == 0 and len(json.loads(out)["results"]) >= 8
    code, out, _ = run(capsys, "fixtures", "--dump", "triangle_tail_z2")
    assert code == 0 and len(json.loads(out)["vertices"]) == 3
    code, out, _ = run(capsys, "fixtures", "--dump", "tetrahedron_boundary")
    assert code == 0 and json.loads(out)["k"] == 2


def test_env_tolerance(capsys, monkeypatch):
    monkeypatch.setenv("SCHROGRAPH_TOL", "abc")
    assert run(capsys, "fixtures")[0] == 1


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "schrograph.cli", "fixtures"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["subcommand"] == "fixtures"
