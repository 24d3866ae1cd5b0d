import json
import subprocess
import sys

import pytest

from hclab.cli import EXIT_FAIL, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from hclab.io import save_params


@pytest.fixture
def pfile(canon, tmp_path):
    path = tmp_path / "canon.json"
    save_params(path, canon)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate(capsys, pfile, canon, tmp_path):
    code, out, _ = run(capsys, "validate", pfile)
    d = json.loads(out)
    assert code == EXIT_OK and d["schema"] == "hclab/v1" and d["all_ok"]
    bad = tmp_path / "bad.json"
    save_params(bad, canon.with_rho(4, 1, 1.1))
    assert run(capsys, "validate", str(bad))[0] == EXIT_FAIL


def test_classify_combinatorial_line(capsys):
    code, out, _ = run(capsys, "classify", "--p", "5", "--combinatorial")
    assert code == EXIT_OK
    assert out.strip() == ('{"classification":"MobiusStrip","boundary_components":1,'
                           '"orientable":false,"euler":0}')
    assert run(capsys, "classify", "--p", "3", "--combinatorial")[0] == EXIT_USAGE
    assert run(capsys, "classify")[0] == EXIT_USAGE


def test_usage_errors(capsys, pfile):
    code, _, err = run(capsys, "validate", pfile, "--bogus")
    assert code == EXIT_USAGE and "usage" in err
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    assert run(capsys, "simulate", "--params", pfile, "--x0", "0.1", "--t-end", "-1")[0] \
        == EXIT_USAGE
    assert run(capsys, "validate", "/no/such/file.json")[0] == EXIT_USAGE
    assert run(capsys, "validate", str(pfile.rsplit("/", 1)[0]))[0] == EXIT_USAGE


def test_simulate_malformed_json_writes_nothing(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 5, "p": 5, "sigma": [1, 1')
    out = tmp_path / "traj.csv"
    code, _, err = run(capsys, "simulate", "--params", str(bad), "--x0", "0.1 0.1 0.1 0.1 0.1",
                       "--t-end", "10", "--out", str(out))
    assert code == EXIT_USAGE and "line" in err
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bad.json"]


def test_simulate_outputs(capsys, pfile, tmp_path):
    x0 = tmp_path / "x0.csv"
    x0.write_text("x_1,x_2,x_3,x_4,x_5\n0.9,0.01,0.02,0.001,0.001\n")
    out = tmp_path / "traj.csv"
    code, stdout, _ = run(capsys, "simulate", "--params", pfile, "--x0", str(x0),
                          "--t-end", "150", "--out", str(out))
    assert code == EXIT_OK
    s = json.loads(stdout)
    rows = out.read_text().splitlines()
    assert rows[0] == "t,x_1,x_2,x_3,x_4,x_5" and len(rows) == s["samples"] + 1
    ev = json.loads((tmp_path / "traj.events.json").read_text())
    assert ev["schema"] == "hclab/v1" and len(ev["events"]) == s["events"] > 0
    assert set(s["itinerary"]["labels"]) <= {1, 2}
    first = out.read_bytes()
    run(capsys, "simulate", "--params", pfile, "--x0", str(x0), "--t-end", "150", "--out", str(out))
    assert out.read_bytes() == first


def test_simulate_numerical_failure(capsys, pfile):
    code, _, err = run(capsys, "simulate", "--params", pfile, "--x0", "3 3 3 3 3", "--t-end", "20",
                       "--method", "rk4", "--h", "1.0", "--no-events")
    assert code == EXIT_NUMERIC and "numerical failure" in err


def test_simulate_bad_state(capsys, pfile):
    assert run(capsys, "simulate", "--params", pfile, "--x0", "0.1 0.1", "--t-end", "1")[0] \
        == EXIT_USAGE
    assert run(capsys, "simulate", "--params", pfile, "--x0", "a b", "--t-end", "1")[0] \
        == EXIT_USAGE


def test_triple(capsys, pfile):
    code, out, _ = run(capsys, "triple", "--params", pfile, "--k", "1", "--check-region",
                       "--converge", "--x0", "0.5 0.3 0.2")
    d = json.loads(out)
    assert code == EXIT_OK and d["ok"] and d["region"]["holds"] and d["converge"]["converged"]
    assert d["indices"] == [1, 2, 3]
    assert run(capsys, "triple", "--params", pfile, "--k", "9")[0] == EXIT_USAGE


def test_trace_and_gamma(capsys, pfile, tmp_path):
    code, out, _ = run(capsys, "trace", "--params", pfile, "--k", "2", "--angles", "5",
                       "--out", str(tmp_path / "fan.json"))
    d = json.loads(out)
    assert code == EXIT_OK and d["triple"] == [2, 3, 4] and len(d["angles"]) == 5
    assert len(json.loads((tmp_path / "fan.json").read_text())["orbits"]) == 5
    mesh = tmp_path / "g.json"
    code, out, _ = run(capsys, "gamma", "--params", pfile, "--angles", "5", "--arc", "8",
                       "--out", str(mesh), "--obj", str(tmp_path / "g.obj"))
    assert code == EXIT_OK
    assert json.loads(out)["topology"]["classification"] == "MobiusStrip"
    assert (tmp_path / "g.obj").read_text().startswith("# hclab")
    code, out, _ = run(capsys, "classify", "--mesh", str(mesh))
    assert json.loads(out)["classification"] == "MobiusStrip"


def test_gamma_jobs_env_is_deterministic(capsys, pfile, tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "gamma", "--params", pfile, "--angles", "5", "--arc", "8", "--out", str(a))
    monkeypatch.setenv("HCLAB_JOBS", "2")
    run(capsys, "gamma", "--params", pfile, "--angles", "5", "--arc", "8", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_classify_bad_mesh(capsys, tmp_path):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"n": 3, "p": 5, "vertices": [[0, 0, 0]] * 5,
                             "tags": [[0, 0, 0]] * 5, "provenance": [1, 1, 1],
                             "triangles": [[0, 1, 2], [0, 1, 3], [1, 0, 4]]}))
    code, _, err = run(capsys, "classify", "--mesh", str(m))
    assert code == EXIT_USAGE and "triangles" in err


def test_contraction(capsys, pfile, canon, tmp_path):
    code, out, _ = run(capsys, "contraction", "--params", pfile, "--k", "1")
    d = json.loads(out)
    assert code == EXIT_OK and d["contracting"] and 1.35 <= d["s"] <= 1.65
    bad = tmp_path / "nd.json"
    save_params(bad, canon.with_rho(4, 1, 1.1))
    assert run(capsys, "contraction", "--params", str(bad), "--k", "1")[0] == EXIT_FAIL
    assert run(capsys, "contraction", "--params", pfile, "--k", "1", "--eps-list", "1e-3",
               "1e-4")[0] == EXIT_FAIL


def test_stability_jobs_deterministic(capsys, pfile, tmp_path):
    mesh = tmp_path / "g.json"
    run(capsys, "gamma", "--params", pfile, "--angles", "9", "--arc", "16", "--out", str(mesh))
    outs = []
    for jobs in ("1", "2"):
        o = tmp_path / f"st{jobs}.json"
        code, stdout, _ = run(capsys, "stability", "--params", pfile, "--mesh", str(mesh),
                              "--trials", "2", "--laps", "1", "--floor", "1e-3",
                              "--jobs", jobs, "--out", str(o))
        assert code in (EXIT_OK, EXIT_FAIL)
        assert json.loads(stdout)["trials"] == 2
        outs.append(o.read_bytes())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["schema"] == "hclab/v1"


def test_sample_and_module_entry(tmp_path):
    out = tmp_path / "s.json"
    r = subprocess.run([sys.executable, "-m", "hclab", "sample", "--n", "6", "--p", "5",
                        "--seed", "3", "-o", str(out)], capture_output=True, text=True)
    assert r.returncode == EXIT_OK and json.loads(r.stdout)["all_ok"]
    r2 = subprocess.run([sys.executable, "-m", "hclab", "validate", str(out)],
                        capture_output=True, text=True)
    assert r2.returncode == EXIT_OK
    r3 = subprocess.run([sys.executable, "-m", "hclab", "--version"], capture_output=True,
                        text=True)
    assert r3.returncode == 0 and r3.stdout.startswith("hclab")
