import json
import math
from fractions import Fraction

import pytest

from apvariance.pipeline import (
    TIMESTAMP_KEY,
    ExperimentConfig,
    FamilyError,
    check_report,
    cross_check,
    dumps_report,
    littlewood_demo,
    mechanism_demo,
    strip_timestamp,
)


def small_cfg(**kw):
    base = dict(q=5, C=3, delta="1/4", sync_k=1, y_max=18)
    base.update(kw)
    return ExperimentConfig(**base)


def test_q4_rejected(store):
    with pytest.raises(FamilyError, match="q=5"):
        mechanism_demo(ExperimentConfig(q=4, C=30), store)


def test_small_demo_report(store):
    rep = mechanism_demo(small_cfg(), store)
    for key in ("Phi_q", "E_q", "T", "M", "sync", "y", "R_normalized", "prediction", "budget", "verdict", "provenance"):
        assert key in rep
    assert rep["T"] == pytest.approx(12.0)
    assert rep["M"] == pytest.approx(3 * math.log(12))
    n = rep["sync"]["n"]
    assert rep["y"] == (n + 1) * Fraction(1, 4)
    assert n >= rep["sync"]["floor"]
    assert all(v for v in rep["provenance"]["zero_sets"].values())
    assert rep["provenance"]["sieve_version"] == 1
    assert check_report(json.loads(dumps_report(rep)))


def test_demo_deterministic(store):
    a = dumps_report(mechanism_demo(small_cfg(), store))
    b = dumps_report(mechanism_demo(small_cfg(), store))
    assert strip_timestamp(a) == strip_timestamp(b)
    assert TIMESTAMP_KEY in json.loads(a)


def test_small_T_q11_prime_side(store):
    rep = mechanism_demo(ExperimentConfig(q=11, C=2, delta="1/4", sync_k=1, y_max=18), store)
    assert float(Fraction(rep["y"])) <= 18
    assert rep["prime_side_verdict"] == "PASS"
    assert check_report(json.loads(dumps_report(rep)))


def test_checker_detects_tampering(store):
    rep = json.loads(dumps_report(mechanism_demo(small_cfg(), store)))
    rep["verdict"] = "PASS" if rep["verdict"] == "FAIL" else "FAIL"
    assert not check_report(rep)


def test_sync_miss_reported(store):
    rep = mechanism_demo(small_cfg(sync_k=2, sync_N=3), store)
    assert rep["verdict"] == "SYNC-MISS"
    assert "count_lower_bound" in rep["sync"]


def test_config_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"q": 7, "delta": "1/8", "C": 12}))
    cfg = ExperimentConfig.from_file(p, C=20)
    assert cfg.q == 7 and cfg.C == 20 and cfg.delta_fraction == Fraction(1, 8)
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValueError, match="bogus"):
        ExperimentConfig.from_file(p)


def test_littlewood_small():
    rep = littlewood_demo(4, 1, 10)
    assert rep["theta"]["jumps"] <= 4
    assert rep["psi"]["min"] == pytest.approx(-math.log(3) / math.sqrt(3))


def test_littlewood_q3(tmp_path):
    rep = littlewood_demo(3, 1, 10**6, tmp_path / "t.csv")
    assert rep["theta"]["min"] < 0
    assert rep["psi"]["min"] < 0
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "x,psi,psi_over_sqrt_x"
    assert 1 < len(lines) <= 1 + rep["trajectory_rows"]


def test_cross_check_empty():
    rep = cross_check(3, [], Fraction(1, 4), 150)
    assert rep["cells"] == [] and rep["verdict"] == "PASS"


def test_cross_check_q3(store):
    rep = cross_check(3, [4.0, 8.0, 12.0], Fraction(1, 4), 150, store)
    assert rep["verdict"] == "PASS"
    assert check_report(json.loads(dumps_report(rep)))


def test_cross_check_T_halved(store):
    a = cross_check(3, [8.0], Fraction(1, 4), 150, store)["cells"][0]
    b = cross_check(3, [8.0], Fraction(1, 4), 75, store)["cells"][0]
    assert b["tail_budget"] > a["tail_budget"]
    assert b["within"] == (b["difference"] <= b["budget"])
