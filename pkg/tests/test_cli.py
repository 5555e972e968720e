import json

import pytest

from apvariance.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_variance(capsys):
    code, out, _ = run(capsys, "variance", "--q", "3", "--x", "10", "--parseval-check")
    assert code == 0
    rep = json.loads(out)
    assert rep["G"] == pytest.approx(16.6035, abs=1e-4)
    assert rep["parseval_residual_G"] < 1e-12


def test_hooley_scan(capsys, tmp_path):
    code, _, _ = run(capsys, "hooley-scan", "--q-min", "3", "--q-max", "6", "--x-grid", "1e4,1e5", "--out", str(tmp_path / "s.csv"))
    assert code == 0
    assert (tmp_path / "s.csv").exists() and (tmp_path / "s.windows.csv").exists()


def test_zeros(capsys, tmp_path):
    out = tmp_path / "z.csv"
    code, _, err = run(capsys, "zeros", "--q", "4", "--height", "20", "--digits", "20", "--verify", "--out", str(out))
    assert code == 0
    assert "verified" in err
    assert out.read_text().splitlines()[1].startswith("4,1,6.0209489046975966549")


def test_family(capsys, tmp_path):
    code, _, _ = run(capsys, "family", "--q", "11", "--w", "1", "--size", "4", "--out", str(tmp_path / "f.json"))
    assert code == 0
    d = json.loads((tmp_path / "f.json").read_text())
    assert d["Phi_q"] == 4 and len(d["members"]) == 4


def test_family_odd_size(capsys):
    code, _, err = run(capsys, "family", "--q", "11", "--w", "1", "--size", "3")
    assert code == 2 and "even" in err


def test_explicit_formula(capsys, tmp_path, store):
    run(capsys, "family", "--q", "5", "--w", "1", "--out", str(tmp_path / "f.json"))
    code, out, _ = run(
        capsys, "explicit-formula", "--q", "5", "--delta", "1/4", "--height", "50", "--y", "37/4",
        "--prime-side", "--family", str(tmp_path / "f.json"), "--zero-store", str(store.root),
    )
    assert code == 0
    rep = json.loads(out)
    assert "zero_truncation_tail" in rep["budget"] and "S_normalized" in rep


def test_synchronize(capsys, tmp_path):
    f = tmp_path / "lam.csv"
    f.write_text("lambda,digits\n0.3333333333333333333333,22\n")
    code, out, _ = run(capsys, "synchronize", "--frequencies", str(f), "--M", "4", "--N", "10")
    assert code == 0
    assert {3, 6, 9} <= set(json.loads(out)["hits"])
    code, out, _ = run(capsys, "synchronize", "--frequencies", str(f), "--M", "4", "--N", "27", "--floor", "auto")
    assert json.loads(out)["lowest"] == 3


def test_synchronize_bad_file(capsys, tmp_path):
    f = tmp_path / "lam.csv"
    f.write_text("gamma\n1\n")
    code, _, err = run(capsys, "synchronize", "--frequencies", str(f), "--M", "4", "--N", "10")
    assert code == 2 and ":1:" in err


def test_mechanism_demo_q4(capsys):
    code, _, err = run(capsys, "mechanism-demo", "--q", "4", "--C", "30")
    assert code == 2 and "q=5" in err


def test_mechanism_demo_config(capsys, tmp_path, store):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"q": 5, "C": 3, "delta": "1/4", "sync_k": 1, "y_max": 18}))
    out = tmp_path / "r.json"
    code, _, _ = run(capsys, "mechanism-demo", "--config", str(cfg), "--zero-store", str(store.root), "--out", str(out))
    rep = json.loads(out.read_text())
    assert rep["config"]["q"] == 5 and rep["kind"] == "mechanism-demo"
    assert code == (0 if rep["verdict"] == "PASS" else 1)


def test_littlewood(capsys, tmp_path):
    code, out, _ = run(capsys, "littlewood-demo", "--q", "4", "--label", "1", "--x-ceiling", "1000", "--csv", str(tmp_path / "t.csv"))
    assert code == 0 and json.loads(out)["psi"]["min"] < 0


def test_cross_check(capsys, store):
    code, out, _ = run(capsys, "cross-check", "--q", "3", "--y-grid", "5,7", "--delta", "1/2", "--height", "150", "--zero-store", str(store.root))
    assert code == 0 and json.loads(out)["verdict"] == "PASS"
