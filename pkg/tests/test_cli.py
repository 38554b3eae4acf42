import csv
import json

import jsonschema
import pytest

from qpvlab import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    data = json.loads(out)
    jsonschema.validate(data, cli.schema())
    return code, data


@pytest.fixture(autouse=True)
def _no_env_out(monkeypatch):
    monkeypatch.delenv(cli.ENV_OUT, raising=False)


def _reports(data):
    return {r["name"]: r for r in data["results"][0]["reports"]}


def test_bounds_d2_k2(capsys):
    code, data = run_json(capsys, "bounds", "--d", "2", "--k", "2")
    assert code == 0
    reps = _reports(data)
    assert reps["cloning_bound"]["value"] == 0.75
    assert reps["cloning_bound"]["exact"] == "3/4"
    assert reps["loss_threshold"]["value"] == 0.125
    assert reps["qc_upper"]["value"] <= 0.926


def test_bounds_defaults_and_d1(capsys):
    code, data = run_json(capsys, "bounds")
    assert code == 0 and data["config"] == {"d": [2], "k": [1]}
    code, data = run_json(capsys, "bounds", "--d", "1", "--k", "3")
    assert _reports(data)["loss_threshold"]["exact"] == "1/3"
    code, data = run_json(capsys, "bounds", "--d", "2,3", "--k", "1,2")
    assert len(data["results"]) == 4


def test_bounds_text_table(capsys):
    code, out, _ = run(capsys, "bounds")
    assert code == 0
    assert "cloning_bound" in out and "3/4" in out


def test_bad_flags_exit_nonzero(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["bounds", "--d", "0"])
    assert info.value.code != 0
    with pytest.raises(SystemExit) as info:
        cli.main(["simulate", "--protocol", "nope", "--strategy", "honest"])
    assert info.value.code != 0
    code, _, err = run(capsys, "simulate", "--protocol", "bell", "--strategy", "locc-xor")
    assert code == 2 and "error" in err


def test_sdp_solve(capsys):
    code, data = run_json(capsys, "sdp", "solve", "--protocol", "sym-antisym")
    assert code == 0
    res = data["results"][0]
    assert abs(res["value"] - 5 / 6) <= 1e-5
    assert res["converged"] is True
    assert set(res["residuals"]) >= {"completeness", "psd", "ppt"}


def test_sdp_non_convergence_exits_nonzero(capsys):
    code, data = run_json(capsys, "sdp", "solve", "--protocol", "sym-antisym-2", "--tol", "1e-12",
                          "--max-iter", "50")
    assert code == 1 and data["ok"] is False
    assert "residuals" in data["results"][0]


def test_sdp_verify_cert(capsys):
    code, data = run_json(capsys, "sdp", "verify-cert", "--protocol", "sym-antisym-2")
    assert code == 0
    res = data["results"][0]
    assert res["valid"] is True
    assert res["bound"]["exact"] == "17/18"
    code, _, err = run(capsys, "sdp", "verify-cert", "--protocol", "bell")
    assert code == 2


def test_sdp_loss_sweep(capsys):
    code, data = run_json(capsys, "sdp", "loss-sweep", "--protocol", "bell", "--eta", "0.25,0.5,0.75,1.0")
    assert code == 0
    vals = [r["conditional_value"] for r in data["results"]]
    assert len(vals) == 4
    assert all(abs(v - 0.5) <= 1e-3 for v in vals)
    assert all("reconstruct" in r["note"] for r in data["results"])


def test_simulate_examples(capsys):
    code, data = run_json(capsys, "simulate", "--protocol", "sym-antisym-2", "--strategy", "loqc-exchange",
                          "--rounds", "100000", "--seed", "7")
    assert code == 0
    assert data["results"][0]["stats"]["success_rate"] == 1.0
    args = ("simulate", "--protocol", "qpv-generic", "--d", "2", "--k", "2", "--strategy", "teleport-guess",
            "--rounds", "1000000", "--seed", "7")
    code, data = run_json(capsys, *args)
    assert abs(data["results"][0]["stats"]["conclusive_rate"] - 0.125) < 0.002
    _, first, _ = run(capsys, *args, "--json")
    _, second, _ = run(capsys, *args, "--json")
    assert first == second


def test_simulate_cross_check(capsys):
    code, data = run_json(capsys, "simulate", "--protocol", "bell", "--strategy", "locc-bell-guess",
                          "--rounds", "100000", "--cross-check")
    assert code == 0
    assert data["results"][1]["flags"] == []


def test_out_dir_writes_bundle_and_csv(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env"))
    run(capsys, "simulate", "--protocol", "sym-antisym", "--strategy", "locc-xor", "--rounds", "1000")
    run(capsys, "simulate", "--protocol", "sym-antisym", "--strategy", "locc-xor", "--rounds", "1000",
        "--out", str(tmp_path / "flag"))
    env_csv = tmp_path / "env" / "simulations.csv"
    assert env_csv.exists() and (tmp_path / "flag" / "simulations.csv").exists()
    with env_csv.open() as fh:
        header = next(csv.reader(fh))
    assert header == ["config_hash", "protocol", "strategy", "rounds", "seed", "success_rate",
                      "conclusive_rate", "conditional_rate", "wilson_lo", "wilson_hi"]
    bundle = json.loads((tmp_path / "env" / "simulate.json").read_text())
    jsonschema.validate(bundle, cli.schema())


def test_canonical_numbers():
    from fractions import Fraction

    assert cli.canonical(Fraction(5, 6)) == {"exact": "5/6", "decimal": 0.833333333333}
    assert cli.canonical(1 / 3) == 0.333333333333
    assert cli.canonical(float("nan")) is None
    assert cli.canonical({1: (True, 2)}) == {"1": [True, 2]}


def test_paper_suite_quick(capsys):
    code, out, _ = run(capsys, "paper-suite", "--quick")
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) == 10 and all(ln.startswith("PASS") for ln in lines)


def test_paper_suite_json_schema(capsys):
    code, data = run_json(capsys, "paper-suite", "--quick", "--seed", "3")
    assert code == 0 and data["ok"] is True and data["seed"] == 3
    assert [r["name"] for r in data["results"]] == [f"c{i}" for i in range(1, 11)]


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit):
        cli.main(["simulate", "--help"])
    out = capsys.readouterr().out
    for flag in ("--protocol", "--strategy", "--rounds", "--seed", "--chunks", "--d", "--k", "--out", "--json"):
        assert flag in out
