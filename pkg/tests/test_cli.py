import csv
import io
import json
import math
import pathlib

import pytest

from wiretap import cli, identities
from wiretap.identities import IdentityReport

DATA = pathlib.Path(__file__).resolve().parents[1] / "data"
PAIR, TAPPED = str(DATA / "bsc_pair.json"), str(DATA / "degenerate_y_eq_z.json")
AUX, BITS = str(DATA / "aux_uniform.json"), str(DATA / "correlated_bits.json")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_entropy_nats_and_bits(capsys):
    code, out, _ = run(capsys, "entropy", BITS, "--a", "x", "--b", "y")
    assert code == 0
    nats = float(rows(out)[0]["value"])
    assert nats == pytest.approx(math.log(2) - (-0.9 * math.log(0.9) - 0.1 * math.log(0.1)), abs=1e-12)
    code, out, _ = run(capsys, "--bits", "entropy", BITS, "--a", "x", "--b", "y")
    assert float(rows(out)[0]["value"]) == pytest.approx(nats / math.log(2), abs=1e-12)


def test_verify_jsonl(capsys, tmp_path):
    out_path = tmp_path / "reports.jsonl"
    code, _, _ = run(capsys, "verify", "--seed", "0", "--cases", "5", "--out", str(out_path))
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert len(lines) == len(identities.run_suite(0, 5)) and all(json.loads(l)["passed"] for l in lines)


def test_verify_failure_exits_2(capsys, monkeypatch):
    bad = IdentityReport("ck", 1.0, 0.0, 1.0, False, 1e-9, seed=7)
    monkeypatch.setattr(identities, "run_suite", lambda *a, **k: [bad])
    code, out, err = run(capsys, "verify")
    assert code == 2 and "numeric failure" in err and "seed 7" in err
    assert json.loads(out)["passed"] is False


def test_capacity(capsys):
    code, out, _ = run(capsys, "capacity", "--channel", PAIR, "--nu", "2", "--nv", "2", "--restarts", "8")
    doc = json.loads(out)
    assert code == 0 and doc["units"] == "nats" and len(doc["restart_values"]) == 8
    assert doc["C_s"] == pytest.approx(0.1753, abs=1e-4)
    assert doc["model"]["type"] == "auxiliary"


def test_region_tapped_collapses(capsys, tmp_path):
    vpath = tmp_path / "v.csv"
    code, out, _ = run(capsys, "region", "--channel", TAPPED, "--nu", "2", "--nv", "2", "--samples", "10",
                       "--vertices", str(vpath))
    assert code == 0
    assert all(abs(float(r["i_diff"])) < 1e-12 for r in rows(out))
    verts = rows(vpath.read_text())
    assert verts and all(float(v["r_e"]) == 0.0 for v in verts)


def test_simulate_and_jsonl(capsys, tmp_path):
    jl = tmp_path / "trials.jsonl"
    code, out, _ = run(capsys, "simulate", "--channel", PAIR, "--aux", AUX, "--rs", "0.1", "--n", "10,20",
                       "--trials", "15", "--jsonl", str(jl))
    assert code == 0
    table = rows(out)
    assert [r["n"] for r in table] == ["10", "20"]
    recs = [json.loads(l) for l in jl.read_text().splitlines()]
    assert len(recs) == 30 and {r["n"] for r in recs} == {10, 20}


def test_equivocation(capsys):
    code, out, _ = run(capsys, "equivocation", "--channel", PAIR, "--aux", AUX, "--n", "4")
    value = float(rows(out)[0]["equivocation"])
    assert code == 0 and 0 <= value <= math.log(2) / 4


def test_byte_identical_outputs(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert cli.main(["simulate", "--channel", PAIR, "--aux", AUX, "--rs", "0.1", "--n", "12",
                         "--trials", "10", "--seed", "3", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize("argv", [
    ["entropy", "missing.json", "--a", "x"],
    ["capacity", "--channel", BITS],
    ["simulate", "--channel", PAIR, "--aux", AUX, "--re", "0.5", "--rs", "0.1"],
    ["simulate", "--channel", PAIR, "--aux", AUX, "--n", "ten"],
    ["simulate", "--channel", PAIR, "--aux", AUX, "--rs", "1.0", "--n", "40", "--trials", "1"],
    ["equivocation", "--channel", PAIR, "--aux", AUX, "--n", "40"],
    ["entropy", BITS, "--a", "q"],
    ["frobnicate"],
    ["verify", "--unknown-flag"],
])
def test_validation_errors_exit_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err.strip()


def test_malformed_json_message(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    code, _, err = run(capsys, "capacity", "--channel", str(bad))
    assert code == 1 and "malformed JSON" in err and len(err.strip().splitlines()) == 1


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    code, _, err = run(capsys, "verify", "--cases", "1")
    assert code == 1 and cli.THREADS_ENV in err
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    assert run(capsys, "verify", "--cases", "2")[0] == 0


def test_help_lists_contracts(capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["simulate", "--help"])
    assert "p_err,ci_lo,ci_hi" in capsys.readouterr().out
