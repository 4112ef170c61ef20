import json

import pytest

from trimmed_ustat.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_rows(tmp_path, rows, header=None, name="x.csv"):
    p = tmp_path / name
    lines = ([header] if header else []) + [str(r) for r in rows]
    p.write_text("\n".join(lines) + "\n")
    return p


def test_estimate_identity(tmp_path, capsys):
    p = write_rows(tmp_path, [1, 2, 3, 4])
    code, out, _ = run(capsys, "estimate", p, "--kernel", "identity", "--alpha", "0.25", "--beta", "0.75",
                       "--no-timestamp")
    d = json.loads(out)
    assert code == 0
    assert (d["u"], d["u_trimmed"], d["l_trimmed"]) == (2.5, 2.5, 0.75)
    assert (d["n_alpha"], d["n_beta"], d["nbar_alpha"], d["nbar_beta"]) == (1, 3, 1, 3)
    assert set(d) == {"n", "m", "N", "u", "u_trimmed", "l_trimmed", "n_alpha", "n_beta", "nbar_alpha", "nbar_beta"}


def test_estimate_half_squared_diff(tmp_path, capsys):
    p = write_rows(tmp_path, [1, 2, 3])
    code, out, _ = run(capsys, "estimate", p, "--kernel", "half_squared_diff", "--alpha", "0.1",
                       "--beta", "0.9", "--no-timestamp")
    assert code == 0 and json.loads(out)["u"] == 1.0


def test_estimate_header(tmp_path, capsys):
    p = write_rows(tmp_path, [0.5, 1.5, 2.5, 3.5, 4.5], header="value")
    code, out, _ = run(capsys, "estimate", p, "--kernel", "identity", "--alpha", "0.2", "--beta", "0.8")
    d = json.loads(out)
    assert code == 0 and d["n"] == 5 and "timestamp" in d


def test_estimate_bad_row_names_line(tmp_path, capsys):
    p = write_rows(tmp_path, [1, 2, "oops", 4], header="value")
    code, _, err = run(capsys, "estimate", p, "--kernel", "identity", "--alpha", "0.2", "--beta", "0.8")
    assert code == 2
    assert "line 4" in json.loads(err)["message"]


def test_estimate_too_few_rows(tmp_path, capsys):
    p = write_rows(tmp_path, [1.0])
    code, _, err = run(capsys, "estimate", p, "--kernel", "max_m", "--m", "2", "--alpha", "0.2", "--beta", "0.8")
    assert code == 2 and json.loads(err)["error"]


def test_estimate_bad_levels(tmp_path, capsys):
    p = write_rows(tmp_path, [1, 2, 3])
    code, _, _ = run(capsys, "estimate", p, "--kernel", "identity", "--alpha", "0.8", "--beta", "0.2")
    assert code == 2


def test_estimate_csv_format(tmp_path, capsys):
    p = write_rows(tmp_path, [1, 2, 3, 4])
    code, out, _ = run(capsys, "estimate", p, "--kernel", "identity", "--alpha", "0.25", "--beta", "0.75",
                       "--format", "csv")
    lines = out.split("\n")
    assert code == 0 and "\r" not in out
    assert lines[0].split(",")[:3] == ["n", "m", "N"]
    assert lines[1].split(",")[:3] == ["4", "1", "4"]


@pytest.mark.parametrize("model_args,deltas", [
    (["--model", "uniform01"], (0.0, 0.0)),
    (["--model", "paper_piecewise", "--model-param", "alpha=0.25", "--model-param", "beta=0.64",
      "--model-param", "m=2"], (0.25, 0.8)),
])
def test_population(capsys, model_args, deltas):
    code, out, _ = run(capsys, "population", *model_args, "--kernel", "max_m", "--m", "2",
                       "--alpha", "0.25", "--beta", "0.64", "--no-timestamp")
    d = json.loads(out)
    assert code == 0
    assert (d["delta_alpha"], d["delta_beta"]) == pytest.approx(deltas, abs=1e-12)
    assert d["cov"][4] > 0


def test_population_needs_calibration(capsys):
    code, _, err = run(capsys, "population", "--model", "uniform01", "--kernel", "half_squared_diff",
                       "--alpha", "0.25", "--beta", "0.64", "--method", "monte-carlo")
    assert code == 2 and json.loads(err)["error"] == "ConfigurationError"


def test_simulate_limit_csv(tmp_path, capsys):
    out = tmp_path / "w.csv"
    code, _, _ = run(capsys, "simulate-limit", "--model", "uniform01", "--kernel", "max_m", "--alpha", "0.25",
                     "--beta", "0.64", "--count", "50", "--format", "csv", "--out", out, "--seed", "3")
    lines = out.read_text().splitlines()
    assert code == 0 and lines[0] == "w" and len(lines) == 51


def test_verify_rejects_bad_levels(tmp_path, capsys):
    cfg = {"model": {"name": "uniform01"}, "kernel": {"name": "max_m", "m": 2}, "alpha": "0.6",
           "beta": "0.5", "n_grid": [10], "replications": 100, "seed": 1}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    code, _, err = run(capsys, "verify", p)
    assert code == 2 and "error" in json.loads(err)


def test_verify_small_config_and_dump(tmp_path, capsys):
    cfg = {"model": {"name": "uniform01"}, "kernel": {"name": "max_m", "m": 2}, "alpha": "0.25",
           "beta": "0.64", "n_grid": [8, 16], "replications": 100, "seed": 1, "limit_sample_size": 500,
           "thresholds": {"ks_max": 0.0}}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    dump = tmp_path / "draws.csv"
    code, out, _ = run(capsys, "verify", p, "--no-timestamp", "--dump-draws", dump)
    d = json.loads(out)
    assert code == 1 and d["passed"] is False and d["failures"]
    rows = dump.read_text().splitlines()
    assert rows[0] == "n,rep,t_u,t_l,rem_alpha,rem_beta" and len(rows) == 201


def test_verify_missing_config(capsys):
    code, _, _ = run(capsys, "verify", "no-such-config.json")
    assert code == 2


def test_identities_pass(capsys):
    code, out, _ = run(capsys, "identities", "--seed", "1", "--no-timestamp")
    d = json.loads(out)
    assert code == 0 and d["passed"]
    assert set(d["suites"]) == {"rank_form", "trimmed_sum_decomposition", "counts_and_events"}


def test_identities_injected_fault(capsys):
    code, out, _ = run(capsys, "identities", "--seed", "1", "--inject-fault", "nbar_off_by_one")
    d = json.loads(out)
    assert code == 1
    suite = d["suites"]["rank_form"]
    assert not suite["passed"] and "sample" in suite["witness"]
    assert d["suites"]["trimmed_sum_decomposition"]["passed"]


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 2
