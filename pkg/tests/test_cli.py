import json

import pytest

from livsiclab.cli import run
from livsiclab.flow import RoofFunction, SuspensionObservable
from livsiclab.observables import TrigObservable, coboundary_from
from livsiclab.suite import CAT
from livsiclab.output import sha256_file

C = TrigObservable.cos


@pytest.fixture
def inputs(tmp_path):
    def put(name, obj):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return str(p)

    return {
        "map": put("cat.json", {"matrix": [[2, 1], [1, 1]]}),
        "phi": put("phi.json", (C(1, 0) + C(0, 1)).to_spec()),
        "cob": put("cob.json", coboundary_from(C(1, 1), CAT).to_spec()),
        "roof": put("roof.json", RoofFunction(1.0, C(1, 1, 0.5)).to_spec()),
        "lift": put("lift.json", SuspensionObservable.lift(C(1, 0)).to_spec()),
        "dir": tmp_path,
    }


def one_line_error(capsys):
    err = capsys.readouterr().err.strip()
    assert err and "\n" not in err
    return err


def test_no_arguments(capsys):
    assert run([]) == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["periodic-orbits", "--map", "x.json", "--max-period", "2", "--out", "o.json", "--bogus"],
    ["clt", "--map", "x.json", "--observable", "y.json", "--n", "10", "--count", "1000", "--out", "o.json"],
    ["periodic-orbits", "--map", "x.json", "--max-period", "0", "--out", "o.json"],
])
def test_usage_errors(argv, capsys):
    assert run(argv) == 2
    one_line_error(capsys)


def test_missing_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert run(["periodic-orbits", "--map", missing, "--max-period", "2", "--out", str(tmp_path / "o.json")]) == 2
    assert missing in one_line_error(capsys)


def test_bad_map(inputs, capsys):
    bad = inputs["dir"] / "bad.json"
    bad.write_text(json.dumps({"matrix": [[1, 1], [0, 1]]}))
    assert run(["periodic-orbits", "--map", str(bad), "--max-period", "2", "--out", str(inputs["dir"] / "o.json")]) == 2
    one_line_error(capsys)


def test_periodic_orbits(inputs):
    out = inputs["dir"] / "orbits.json"
    assert run(["periodic-orbits", "--map", inputs["map"], "--max-period", "4", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert [c["points"] for c in d["counts"]] == [1, 5, 16, 45]
    m = json.loads((inputs["dir"] / "orbits.json.manifest.json").read_text())
    assert m["outputs"][0]["sha256"] == sha256_file(out)
    assert m["inputs"]["map"]["matrix"] == [[2, 1], [1, 1]]


def test_obstruction_on_coboundary_is_all_zero(inputs, capsys):
    assert run(["obstruction", "--map", inputs["map"], "--observable", inputs["cob"], "--max-period", "8"]) == 0
    d = json.loads(capsys.readouterr().out.split("\n", 1)[1])
    assert d["all_zero"] and d["max_abs_obstruction"] <= 1e-10


def test_solve_writes_svg_and_csv(inputs):
    o = inputs["dir"]
    argv = ["solve", "--map", inputs["map"], "--observable", inputs["cob"], "--steps", "20000",
            "--resolution", "16", "--seed", "1", "--out", str(o / "s.json"), "--svg", str(o / "s.svg"),
            "--csv", str(o / "s.csv")]
    assert run(argv) == 0
    assert (o / "s.svg").read_text().startswith("<svg")
    assert len((o / "s.csv").read_text().splitlines()) == 1 + 16 * 16
    assert json.loads((o / "s.json").read_text())["residual"]["at_noise_floor"]


def test_witness_on_coboundary_fails(inputs, capsys):
    argv = ["witness", "--map", inputs["map"], "--observable", inputs["cob"], "--N-max", "10", "--count", "1000",
            "--seed", "1"]
    assert run(argv) == 2
    one_line_error(capsys)


def test_replay_is_identical(inputs, capsys):
    out = str(inputs["dir"] / "f.json")
    argv = ["flow-clt", "--map", inputs["map"], "--roof", inputs["roof"], "--observable", inputs["lift"],
            "--t", "5", "20", "--count", "2000", "--seed", "3", "--out", out]
    assert run(argv) == 0
    capsys.readouterr()
    assert run(["replay", out + ".manifest.json"]) == 0
    assert "identical" in capsys.readouterr().out


def test_replay_detects_change(inputs, capsys):
    out = inputs["dir"] / "o.json"
    assert run(["periodic-orbits", "--map", inputs["map"], "--max-period", "3", "--out", str(out)]) == 0
    mpath = inputs["dir"] / "o.json.manifest.json"
    m = json.loads(mpath.read_text())
    m["outputs"][0]["sha256"] = "0" * 64
    mpath.write_text(json.dumps(m))
    capsys.readouterr()
    assert run(["replay", str(mpath)]) == 1
    assert "DIFFERS" in capsys.readouterr().out


def test_thread_count_does_not_change_output(inputs):
    texts = []
    for threads in ("1", "3"):
        out = inputs["dir"] / f"c{threads}.json"
        argv = ["--threads", threads, "clt", "--map", inputs["map"], "--observable", inputs["phi"], "--n", "10", "50",
                "--count", "40000", "--seed", "2", "--out", str(out)]
        assert run(argv) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_demo(inputs):
    out = inputs["dir"] / "demo.json"
    assert run(["demo", "--seed", "7", "--samples", "1000", "--steps", "40000", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["all_passed"] and len(d["rows"]) == 14
