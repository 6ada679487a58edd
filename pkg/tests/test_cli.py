import csv
import io
import json
import subprocess
import sys

import pytest

from momentspace.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_transform_examples(capsys):
    assert run(capsys, "transform", "--space", "halfline", "--to", "moments", "--in", "1,1,1,1")[:2] == \
        (0, "1,2,5,14\n")
    code, out, _ = run(capsys, "transform", "--space", "compact", "--a", "0", "--b", "1",
                       "--to", "canonical", "--in", "0.5,0.375")
    assert (code, out) == (0, "0.5,0.5\n")
    code, out, _ = run(capsys, "transform", "--space", "realline", "--to", "recursion", "--in", "0,1,0,1")
    assert (code, out) == (0, "0,1,0,1\n")


def test_transform_round_trip_is_bit_faithful(capsys):
    y = "0.123,0.77,0.5,0.31"
    _, m, _ = run(capsys, "transform", "--space", "compact", "--a", "-1", "--b", "2",
                  "--to", "moments", "--in", y)
    # values starting with '-' must be attached with '='
    _, back, _ = run(capsys, "transform", "--space", "compact", "--a", "-1", "--b", "2",
                     "--to", "canonical", f"--in={m.strip()}")
    assert [float(v) for v in back.split(",")] == pytest.approx([float(v) for v in y.split(",")], rel=1e-12)


def test_transform_domain_error(capsys):
    code, out, err = run(capsys, "transform", "--space", "compact", "--to", "canonical", "--in", "0.5,0.2")
    assert code == 2 and out == ""
    assert "index 2" in err


def test_usage_errors(capsys):
    assert run(capsys, "transform", "--to", "sideways", "--in", "1")[0] == 64
    assert run(capsys, "nonsense")[0] == 64
    assert run(capsys)[0] == 64
    assert run(capsys, "sample", "--n", "x")[0] == 64


def test_sample_determinism_and_header(capsys, tmp_path):
    args = ["sample", "--space", "compact", "--n", "5", "--count", "3", "--seed", "7"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    table = rows(a.read_text())
    assert table[0] == ["rep", "m1", "m2", "m3", "m4", "m5"]
    assert len(table) == 4


def test_sample_count_zero(capsys):
    code, out, _ = run(capsys, "sample", "--space", "halfline", "--v1", "0,1", "--n", "4", "--count", "0")
    assert code == 0 and out == "rep,m1,m2,m3,m4\n"


def test_sample_lln(capsys):
    code, out, _ = run(capsys, "sample", "--n", "200", "--count", "500", "--k", "2", "--seed", "1")
    m1 = [float(r[1]) for r in rows(out)[1:]]
    assert abs(sum(m1) / len(m1) - 0.5) < 0.01


def test_sample_rejects_bad_potential(capsys):
    assert run(capsys, "sample", "--space", "halfline", "--n", "4")[0] == 2


def test_density_outputs(capsys):
    code, out, _ = run(capsys, "density", "--measure", "sc", "--alpha", "0", "--beta", "1", "--grid=-2:2:5")
    table = rows(out)
    assert table[0] == ["x", "density"]
    assert float(table[3][1]) == pytest.approx(1 / 3.141592653589793)
    code, out, _ = run(capsys, "density", "--measure", "fb", "--p1", "0.2", "--p2", "0.4")
    assert out == "x,density\natom,0,0.5\n"


def test_stieltjes_outputs(capsys):
    _, out, _ = run(capsys, "stieltjes", "--measure", "sc", "--alpha", "0", "--beta", "1", "--z", "1j")
    r = rows(out)
    assert r[0] == ["re_z", "im_z", "re_phi", "im_phi"]
    assert [float(v) for v in r[1]] == pytest.approx([0, 1, 0, -0.6180339887498949])
    _, out, _ = run(capsys, "stieltjes", "--rc-alpha", "0", "--z", "1j")
    assert [float(v) for v in rows(out)[1]] == pytest.approx([0, 1, 0, -1])
    _, closed, _ = run(capsys, "stieltjes", "--measure", "mp", "--z1", "1", "--z2", "1", "--z", "2+1j")
    _, cf, _ = run(capsys, "stieltjes", "--measure", "mp", "--z1", "1", "--z2", "1", "--depth", "400",
                   "--z", "2+1j")
    a, b = [float(v) for v in rows(closed)[1]], [float(v) for v in rows(cf)[1]]
    assert a == pytest.approx(b, abs=1e-8)
    assert run(capsys, "stieltjes", "--measure", "sc", "--alpha", "0", "--beta", "1", "--z", "1")[0] == 2


def test_verify_equilibrium(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "equilibrium", "--measure", "fb",
                       "--a", "0", "--b", "1", "--p1", "0.5", "--p2", "0.4")
    report = json.loads(out)
    assert code == 0
    assert set(report) == {"tool_version", "config", "results", "summary", "wall_clock_s"}
    assert report["summary"]["passed"] is True


def test_verify_clt_spec_command(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "clt", "--space", "compact", "--a", "0", "--b", "1",
                       "--v1", "0", "--v2", "0", "--n", "2000", "--count", "20000", "--k", "3",
                       "--seed", "1")
    assert code == 0
    assert json.loads(out)["summary"]["passed"] is True


@pytest.mark.parametrize("argv", [
    ["--suite", "lln", "--space", "halfline", "--v1", "0,1", "--n", "500", "--count", "500", "--seed", "1"],
    ["--suite", "mdp", "--space", "realline", "--v1", "0,0,1", "--v2", "0,1", "--k", "4"],
    ["--suite", "ldp", "--space", "halfline", "--v1", "0,1", "--c", "2", "--n", "2000"],
    ["--suite", "scaling", "--measure", "sc", "--alpha", "0", "--beta", "1", "--mode", "to_sc"],
])
def test_verify_suites_pass(capsys, argv):
    code, out, _ = run(capsys, "verify", *argv)
    assert code == 0, out
    assert json.loads(out)["summary"]["passed"] is True


def test_verify_failure_exit_code(capsys):
    # the exterior inequality is fine but an atomic law has no field: domain error
    assert run(capsys, "verify", "--suite", "equilibrium", "--measure", "fb", "--p1", "0.2", "--p2", "0.4")[0] == 2


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "transform", "space": "halfline", "to": "moments", "input": "1,1,1"}))
    assert run(capsys, "--config", str(cfg))[:2] == (0, "1,2,5\n")
    # explicit flags win over the file
    assert run(capsys, "--config", str(cfg), "transform", "--in", "2")[:2] == (0, "2\n")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert run(capsys, "--config", str(bad), "transform", "--to", "moments", "--in", "1")[0] == 64
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert run(capsys, "--config", str(broken), "transform")[0] == 64


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "momentspace", "transform", "--space", "halfline",
                           "--to", "moments", "--in", "1,1"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "1,2\n"
