import csv
import io
import json
import math
import subprocess
import sys

import pytest

from helpers import TINY_LINKS
from supplynet.cli import content_hash, run

BASE = ["--mu", "2", "--sigma2", "1", "--delta", "18", "--c", "0.5"]


def doc(argv):
    code, text = run(argv)
    return code, json.loads(text)


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({"n": 4, "m": 3, "links": TINY_LINKS}))
    return str(path)


def test_equilibrium():
    code, d = doc(["equilibrium", *BASE, "--w", "0"])
    r = d["result"]
    assert code == 0
    assert (r["K"], r["d"], r["links"], r["welfare"]) == (8, 6, 48, 132.0)
    assert d["input_hash"] == content_hash(d["config"])


def test_equilibrium_verified():
    code, d = doc(["equilibrium", *BASE, "--m", "12", "--n", "60", "--verify"])
    assert d["result"]["verification"]["certified"]


def test_planner():
    code, d = doc(["planner", *BASE])
    assert (d["result"]["K_opt"], d["result"]["welfare_opt"]) == (8, 152.0)


def test_prices_variance_case():
    code, d = doc(["prices", *BASE, "--m", "4", "--sigma2", "0.5,1,1,1", "--n", "100"])
    r = d["result"]
    assert r["case"] == "hetero_variance"
    assert r["w_star"][0] == 0.25 and r["epsilon"][0]


def test_verify_tiny(tiny_file):
    code, d = doc(["verify", "--network", tiny_file, "--w", "12,13,13", *BASE])
    assert code == 0
    assert d["result"]["certified"] is True
    assert d["result"]["selected"] is False


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mu": 2, "sigma2": 1, "delta": 18, "c": 0.5, "m": 20}))
    _, a = doc(["planner", "--config", str(cfg)])
    _, b = doc(["planner", "--config", str(cfg), "--c", "1.0"])
    assert a["result"]["welfare_opt"] == 152.0
    assert b["config"]["c"] == 1.0 and b["result"]["welfare_opt"] != 152.0
    assert a["input_hash"] != b["input_hash"]


def test_validation_failure_exit_code():
    code, d = doc(["equilibrium", *BASE[:-2], "--c", "32"])
    assert code == 1
    assert d["error"] == "ValidationFailed" and "c-bound" in d["message"]


def test_size_limit_exit_code():
    code, d = doc(["verify", *BASE, "--m", "21"])
    assert code == 2 and d["error"] == "SizeLimit"
    code, d = doc(["equilibrium", *BASE, "--n", "10"])
    assert code == 2 and d["error"] == "InsufficientRetailers"


def test_shape_mismatch_exit_code():
    code, d = doc(["equilibrium", *BASE, "--m", "3", "--w", "1,2"])
    assert code == 1


def test_montecarlo():
    code, d = doc(["montecarlo", *BASE, "--draws", "20000", "--family", "uniform", "--seed", "4"])
    assert code == 0 and d["result"]["passed"]
    assert {r["family"] for r in d["result"]["reports"]} == {"uniform"}
    assert d["config"]["seed"] == 4


def test_json_byte_stable():
    argv = ["montecarlo", *BASE, "--draws", "5000", "--seed", "7"]
    assert run(argv) == run(argv)


def parse_sweep(text):
    lines = text.split("\n")
    comments = [x for x in lines if x.startswith("#")]
    body = "\n".join(x for x in lines if not x.startswith("#"))
    return comments, list(csv.DictReader(io.StringIO(body)))


def test_sweep_mu():
    code, text = run(["sweep", *BASE, "--vary", "mu", "--start", "1", "--stop", "4", "--step", "0.05"])
    assert code == 0
    assert "\r" not in text
    comments, rows = parse_sweep(text)
    assert comments[0].startswith("# config: ") and comments[1].startswith("# input_hash: ")
    assert len(rows) == 61
    for row in rows:
        mu = float(row["mu"])
        z = 18 / mu - 1 / mu**2 - 0.5 / mu**2
        if row["status"] != "ok":
            continue
        assert int(row["K_star"]) == math.floor(z + 1e-9)
        assert float(row["pos"]) <= 1.0


def test_sweep_skip_marker():
    code, text = run(["sweep", *BASE, "--vary", "c", "--start", "0.5", "--stop", "40", "--step", "19.75"])
    _, rows = parse_sweep(text)
    assert [r["status"] for r in rows] == ["ok", "ok", "skip"]
    assert rows[-1]["reason"] == "ValidationFailed"


def test_sweep_parallel_matches_serial():
    argv = ["sweep", *BASE, "--vary", "sigma2", "--start", "0", "--stop", "3", "--step", "0.25"]
    assert run(argv) == run(argv + ["--jobs", "3"])


def test_sweep_metric_selection():
    _, text = run(["sweep", *BASE, "--vary", "mu", "--start", "1", "--stop", "2", "--step", "0.5",
                   "--metrics", "K_star,pos"])
    _, rows = parse_sweep(text)
    assert "K_opt" not in rows[0] and "pos" in rows[0]
    code, _ = run(["sweep", "--vary", "mu", "--start", "1", "--stop", "2", "--step", "1",
                   "--metrics", "bogus"])
    assert code == 1


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "supplynet", "planner", *BASE], capture_output=True, text=True, check=True
    )
    assert json.loads(out.stdout)["result"]["K_opt"] == 8
