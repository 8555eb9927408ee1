import json

import pytest

from superforms import sff
from superforms.cli import ConfigError, RunConfig, main, read_config_file, resolve
from superforms.report import load


def run(tmp_path, *argv):
    out = tmp_path / "report.jsonl"
    code = main(list(argv) + ["--out", str(out)])
    return code, (load(out) if out.exists() else None)


def names(recs):
    return {r["name"]: r["status"] for r in recs if r["record"] == "check"}


def test_verify_algebra_example(tmp_path):
    code, recs = run(tmp_path, "verify-algebra", "--n", "4", "--trials", "200", "--seed", "7")
    assert code == 0
    got = names(recs)
    for name in ("J^2", "d#=JdJ", "star-double", "commutator-L-Lambda", "star-L-r",
                 "primitive-decomp", "lefschetz-inverse"):
        assert got[name] == "pass"
    assert recs[0]["config"]["seed"] == 7 and recs[-2]["pass"] is True


def test_bkn_example(tmp_path):
    code, recs = run(tmp_path, "bkn", "--n", "1", "--weight", "quadratic", "--grid", "256")
    assert code == 0
    got = names(recs)
    assert got["bkn-(1,1)"] == "pass" and got["example-box-d-order"] == "pass"


def test_bkn_n2_lists_skipped_example(tmp_path):
    code, recs = run(tmp_path, "bkn", "--n", "2", "--grid", "64")
    assert code == 0
    skipped = [r for r in recs if r.get("status") == "skipped"]
    assert skipped and skipped[0]["reason"]


def test_solve_example(tmp_path):
    code, recs = run(tmp_path, "solve", "--n", "2", "--p", "1", "--q", "2",
                     "--weight", "quadratic", "--bound", "p-epsilon")
    assert code == 0
    (check,) = [r for r in recs if r["record"] == "check"]
    assert check["data"]["bound_satisfied"] is True


def test_solve_failure_exit_code(tmp_path):
    code, recs = run(tmp_path, "solve", "--n", "2", "--p", "1", "--q", "0", "--bound", "k-minus-n")
    assert code == 1
    assert "k > n" in recs[1]["reason"]


def test_invalid_config_exit_code(tmp_path, capsys):
    assert main(["solve", "--weight", "bogus"]) == 2
    assert "bogus" in capsys.readouterr().err
    assert main(["solve", "--n", "2", "--p", "3"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["solve", "--grid", "8,8,8", "--n", "2"]) == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# demo\nn = 1\ngrid = 64\nweight = quartic\nq = 0\n")
    c = resolve(["solve", "--config", str(cfg), "--grid", "128"])
    assert (c.n, c.grid, c.weight, c.q) == (1, "128", "quartic", 0)
    bad = tmp_path / "bad.cfg"
    bad.write_text("n: 3\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)
    bad.write_text("trials = many\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)


def test_report_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    argv = ["solve", "--n", "2", "--grid", "16", "--seed", "11", "--bound", "p-epsilon"]
    _, ra = run(a, *argv)
    _, rb = run(b, *argv)
    body = lambda recs: [json.dumps(r, sort_keys=True) for r in recs if r["record"] != "stamp"]  # noqa: E731
    assert body(ra) == body(rb)


def test_sff_in_and_out(tmp_path):
    alpha_path = tmp_path / "alpha.sff"
    code, _ = run(tmp_path, "solve", "--n", "2", "--grid", "16", "--p", "2", "--alpha-out", str(alpha_path))
    assert code == 0
    alpha = sff.read(alpha_path)
    assert (alpha.p, alpha.q) == (1, 2)
    # feed d(alpha) back in as beta
    from superforms.calculus import d
    beta_path = tmp_path / "beta.sff"
    sff.write(beta_path, d(alpha))
    code, recs = run(tmp_path, "solve", "--n", "2", "--p", "2", "--beta", str(beta_path))
    assert code == 0


def test_other_commands(tmp_path):
    assert run(tmp_path, "verify-bridge", "--n", "2", "--trials", "10")[0] == 0
    assert run(tmp_path, "solve-box", "--n", "1", "--grid", "128", "--p", "1", "--q", "1",
               "--box=-4,4", "--tol", "1e-9")[0] == 0
    code, recs = run(tmp_path, "legendre", "--n", "1", "--grid", "256", "--weight", "quadratic+quartic")
    assert code == 0
    assert names(recs)["euler-residual quadratic+quartic"] == "skipped"
    for target in ("bkn", "example", "solve"):
        code, recs = run(tmp_path, "convergence", "--n", "1", "--grid", "128", "--q", "0", "--target", target)
        assert code == 0, recs


def test_runconfig_grid_parsing():
    c = RunConfig(command="bkn", n=2, grid="16,32")
    assert c.grid_shape == (16, 32)
    assert c.make_grid(2).m == (32, 64)
