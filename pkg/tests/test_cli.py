import csv
import hashlib
import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from srcrr.cli import main
from srcrr.probability import Alphabet, JointPmf, pmf_to_dict
from srcrr.pruning import MarkovFiveTuple


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_pmf(path, mass, names):
    mass = np.asarray(mass, dtype=float)
    p = JointPmf([Alphabet.range(n, k) for n, k in zip(names, mass.shape)], mass)
    path.write_text(json.dumps(pmf_to_dict(p)))
    return path


def test_gk_example(capsys):
    code, out, _ = run(capsys, "gk", "--input", "builtin:gk-example-p", "--left", "X", "--right", "Y")
    assert code == 0
    doc = json.loads(out)
    assert doc["classes"] == 3
    assert doc["class_masses"] == [0.35, 0.3, 0.35]
    assert doc["choices"] == 16


def test_gk_identity_and_product(tmp_path, capsys):
    ident = write_pmf(tmp_path / "i.json", np.eye(2) / 2, "XY")
    doc = json.loads(run(capsys, "gk", "--input", ident)[1])
    assert (doc["classes"], doc["choices"]) == (2, 1)
    prod = write_pmf(tmp_path / "p.json", np.full((2, 3), 1 / 6), "XY")
    doc = json.loads(run(capsys, "gk", "--input", prod)[1])
    assert (doc["classes"], doc["gk_entropy_bits"]) == (1, 0.0)


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "gk", "--input", bad)[0] == 2
    assert run(capsys, "gk", "--input", tmp_path / "missing.json")[0] == 2
    assert run(capsys, "gk", "--input", "builtin:nope")[0] == 2


def test_degenerate_exit_code(tmp_path, capsys):
    doc = {"variables": [{"name": "X", "symbols": ["a"]}, {"name": "Y", "symbols": ["b"]}],
           "mass": [{"index": ["a", "b"], "p": 0}]}
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(doc))
    assert run(capsys, "gk", "--input", path)[0] == 3


def test_infeasible_exit_code(tmp_path, capsys):
    dist = tmp_path / "d.json"
    dist.write_text(json.dumps({"values": [[0.5], [1.0]], "recon": ["x"]}))
    code, _, err = run(
        capsys, "region", "--method", "star", "--rho", 0.1, "--delta", 0.1, "--D", 0.2,
        "--distortion", dist,
    )
    assert code == 4
    assert "D_min=0.75" in err


def test_precondition_exit_code(capsys):
    assert run(capsys, "demo-discontinuity", "--rho", 0.1, "--D", 0.1)[0] == 5
    assert run(capsys, "region", "--method", "binary", "--rho", 0.1, "--delta", 0, "--D", 0.1)[0] == 5


def test_usage_error_is_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["region", "--method", "nope", "--D", "0"])
    assert exc.value.code == 2


def test_binary_region_csv(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, _, err = run(capsys, "region", "--method", "binary", "--rho", 0.05, "--delta", 0.2,
                       "--D", 0, "--out", out)
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[1][2:] == ["0.286396957", "0.778011304"]
    assert "corners=1" in err
    manifest = json.loads((tmp_path / "b.csv.manifest.json").read_text())
    assert manifest["command"] == "region" and manifest["seed"] == 42


def test_region_is_byte_reproducible(tmp_path, capsys):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.csv"
        args = ["region", "--method", "qb", "--input", "builtin:equivalent-qsuv", "--D", 0.1, 0.2,
                "--grid", 0.1, "--seed", 3, "--out", out]
        assert run(capsys, *args)[0] == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    manifest = json.loads((tmp_path / "r0.csv.manifest.json").read_text())
    raw = resources.files("srcrr").joinpath("data", "equivalent_qsuv.json").read_bytes()
    assert manifest["input_sha256"] == hashlib.sha256(raw).hexdigest()


def test_equivalent_pair_agree_on_cli(tmp_path, capsys):
    rows = []
    for src in (["--input", "builtin:equivalent-qsuv"], ["--rho", 0.2, "--delta", 0.2]):
        out = tmp_path / "x.csv"
        run(capsys, "region", "--method", "qb", *src, "--D", 0.1, "--grid", 0.02, "--out", out)
        rows.append([float(x) for x in list(csv.reader(out.open()))[1][2:]])
    assert rows[0] == pytest.approx(rows[1], abs=5e-3)


def test_star_large_distortion_single_origin_row(tmp_path, capsys):
    out = tmp_path / "s.csv"
    run(capsys, "region", "--method", "star", "--rho", 0.1, "--delta", 0.3, "--D", 1.0,
        "--k", 2, "--grid", 0.1, "--out", out)
    rows = list(csv.reader(out.open()))
    assert rows[1:] == [["1", "0", "0", "0"]]


def test_triple_eval(capsys):
    code, out, _ = run(capsys, "region", "--method", "triple-eval", "--rho", 0.05, "--delta", 0.2,
                       "--D", 0.5)
    doc = json.loads(out)
    assert code == 0
    t = doc["triples"][0]
    assert t["dag_admissible"] and t["corner_ddag"][1] <= t["corner_dag"][1] + 1e-9


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", "--rho", 0.05, "--delta", 0.2)
    doc = json.loads(out)
    assert code == 0
    assert list(doc["cases"])[:6] == ["A", "B", "C", "D", "E", "F"]
    assert doc["cases"]["A"] and doc["cases"]["B_prime"]


def test_classify_wrong_variables(capsys):
    assert run(capsys, "classify", "--input", "builtin:gk-example-p")[0] == 2


def five_tuple_file(tmp_path):
    rng = np.random.default_rng(0)
    pa = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
    pa[1, 1] = 0.0
    pa *= 0.98 / pa.sum()
    pa[1, 1] = 0.01
    t = MarkovFiveTuple.from_parts(pa, rng.dirichlet(np.ones(2), size=2).reshape(2, 2, 1))
    path = tmp_path / "t.json"
    path.write_text(json.dumps(pmf_to_dict(t.joint)))
    return path


def test_prune_commands(tmp_path, capsys):
    path = five_tuple_file(tmp_path)
    code, out, _ = run(capsys, "prune", "--input", path, "--method", "a", "--eta", 0.3,
                       "--event", "0,0;0,1;1,0")
    doc = json.loads(out)
    assert code == 0 and all(doc["holds"].values())
    code, out, _ = run(capsys, "prune", "--input", path, "--method", "b", "--eta", 0.3,
                       "--delta", 0.01, "--out", tmp_path / "b.json")
    assert code == 0 and json.loads((tmp_path / "b.json").read_text())["method"] == "B"
    assert run(capsys, "prune", "--input", path, "--method", "b", "--eta", 0.3)[0] == 5


def test_demo_outputs(tmp_path, capsys):
    out = tmp_path / "demo.csv"
    code, stdout, _ = run(capsys, "demo-discontinuity", "--rho", 0.05, "--D", 0.1, "--out", out)
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0][:3] == ["delta", "r_uv_min", "sum_rate_min"]
    assert rows[-1][:3] == ["0", "0", "0"]
    doc = json.loads((tmp_path / "demo.json").read_text())
    assert doc["discontinuous"] and doc["gap"] > 0.05


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "srcrr.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("srcrr ")
