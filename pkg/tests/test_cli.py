import csv
import json
import subprocess
import sys

import pytest

from conftest import COBOUNDARY, FIBONACCI, MAIN, THETA3
from subfluct.cli import main


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    status = main([*args, "--out", str(out)])
    return status, out


def load(out):
    return json.loads((out / "report.json").read_text())


def test_analyze_main(tmp_path):
    status, out = run(tmp_path, "analyze", MAIN)
    assert status == 0
    res = load(out)["result"]
    assert res["matrix"] == [[2, 1], [1, 2]]
    assert [e["value"] for e in res["eigenvalues"]] == ["3", "1"]
    assert res["eigenvalues"][1]["left"] == [["1", "-1"]]
    assert res["primitive"] is True


def test_cobound_example(tmp_path):
    status, out = run(tmp_path, "cobound", "--rules", COBOUNDARY)
    assert status == 0
    certs = load(out)["result"]["certificates"]
    by_value = {c["eigenvalue"]: c["certificate"] for c in certs}
    assert set(by_value) == {"1", "-1"}
    assert by_value["1"]["is_coboundary"] is True
    assert by_value["1"]["h"] == ["0", "-1", "-1", "0"]
    assert by_value["-1"]["is_coboundary"] is False


def test_rules_file(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text("a=aab\nb=bba\n")
    status, out = run(tmp_path, "analyze", "--rules-file", str(path))
    assert status == 0
    assert load(out)["config"]["rules"] == "a=aab;b=bba"


@pytest.mark.parametrize(
    "args, code",
    [
        (["analyze", "a=a"], "invalid_substitution"),
        (["analyze", "a=ab;b=b"], "invalid_substitution"),
        (["analyze", "a=ab;b=c"], "syntax"),
        (["analyze", "a=ab;b==a"], "syntax"),
        (["clt", MAIN, "--f", "1,0"], "invalid_argument"),
        (["clt", MAIN, "--n", "0"], "invalid_argument"),
        (["analyze"], "invalid_argument"),
    ],
)
def test_invalid_input_exit_1(tmp_path, capsys, args, code):
    status, out = run(tmp_path, *args)
    assert status == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == code
    assert not (out / "report.json").exists()


def test_usage_error_exit_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "analyze", MAIN, "--no-such-flag")
    assert exc.value.code == 1


@pytest.mark.parametrize("command", ["clt", "typical"])
def test_refusal_exit_2(tmp_path, capsys, command):
    status, _ = run(tmp_path, command, THETA3, "--n", "1000")
    assert status == 2
    assert json.loads(capsys.readouterr().err)["error"] == "refused"


def test_cantor_refused_without_contracting_eigenvalue(tmp_path):
    status, _ = run(tmp_path, "cantor", MAIN, "--n", "100", "--mc", "100")
    assert status == 2


def test_experiment_csv_outputs(tmp_path):
    status, out = run(tmp_path, "clt", MAIN, "--n", "729")
    assert status == 0
    rows = list(csv.reader(open(out / "samples.csv")))
    assert rows[0] == ["n", "value_re", "value_im"]
    assert len(rows) == 730
    hist = list(csv.reader(open(out / "hist.csv")))
    assert hist[0] == ["bin_lo", "bin_hi", "count"]
    assert sum(int(r[2]) for r in hist[1:]) == 729
    cfg = load(out)["config"]
    assert cfg["n"] == 729 and cfg["f"] == ["1", "-1"] and cfg["lambda_f"] == "1"


def test_defaults_recorded(tmp_path):
    status, out = run(tmp_path, "coupling", MAIN)
    assert status == 0
    rep = load(out)
    assert rep["config"]["n"] == 3**8
    assert rep["config"]["r"] == [1, 2, 3, 4, 5, 6]
    assert rep["result"]["strictly_decreasing"] is True


@pytest.mark.parametrize(
    "args",
    [
        ["cantor", FIBONACCI, "--n", "3000", "--mc", "6000", "--seed", "4"],
        ["mclt", MAIN, "--n", "50", "--mc", "6000", "--seed", "4"],
        ["blowup", "a=aaab;b=abbb", "--ell", "4..5", "--mc", "6000"],
    ],
)
def test_byte_identical_across_runs_and_threads(tmp_path, args):
    outputs = []
    for i, threads in enumerate(["1", "1", "4"]):
        status, out = run(tmp_path, *args, "--threads", threads, name=f"run{i}")
        assert status == 0
        outputs.append({f: (out / f).read_bytes() for f in ("report.json", "samples.csv", "hist.csv")})
    assert outputs[0] == outputs[1] == outputs[2]


def test_threads_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SUBFLUCT_THREADS", "0")
    status, _ = run(tmp_path, "analyze", MAIN)
    assert status == 1


def test_out_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SUBFLUCT_OUT", str(tmp_path / "envout"))
    assert main(["classify", FIBONACCI]) == 0
    assert load(tmp_path / "envout")["result"]["bounded"] is True


def test_mclt_coboundary_mode(tmp_path):
    status, out = run(tmp_path, "mclt", MAIN, "--mode", "coboundary", "--n", "200", "--mc", "500")
    assert status == 0
    res = load(out)["result"]
    assert res["coboundary_type"] is True
    assert res["sup_bound_holds"] is True


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "subfluct.cli", "analyze", MAIN, "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["files"] == ["report.json"]


def test_measures_drift_table(tmp_path):
    status, out = run(tmp_path, "measures", "a=aab;b=bab")
    assert status == 0
    table = load(out)["result"]["drift_table"]
    assert any(row["f"] == ["1", "-1"] and row["drift"] == "1/3" for row in table)
