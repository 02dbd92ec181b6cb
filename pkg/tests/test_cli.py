import json
import subprocess
import sys
from pathlib import Path

import pytest

from pbgfid import cli

GOLDEN = Path(__file__).parent / "golden"
FAST = ["--slots", "20000", "--warmup", "1000"]


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# -- parsing -----------------------------------------------------------------

def test_defaults():
    spec = cli.parse_args(["cmf", "--length-km", "15"])
    assert spec.command == "cmf"
    assert spec.length_km == 15.0
    assert (spec.attenuation, spec.attenuation_units) == (0.15, "natural")
    assert spec.decoherence_time == 1e-3
    assert spec.signal_speed == 3e8
    assert (spec.f0, spec.f_eps) == (1.0, 0.55)
    assert spec.policy == "pbg" and spec.format == "csv"
    assert spec.slots == 2_000_000


def test_sweep_points():
    spec = cli.parse_args(["sweep", "--from-km", "4", "--to-km", "30", "--step-km", "2"])
    d = spec.distances()
    assert len(d) == 14
    assert d[0] == 4 and d[-1] == 30


def test_sweep_non_integer_step():
    spec = cli.parse_args(["sweep", "--from-km", "1", "--to-km", "2", "--step-km", "0.1"])
    assert len(spec.distances()) == 11


def test_validation_error_exit(capsys):
    code, out, err = run(["solve", "--f-eps", "0.4"], capsys)
    assert code == cli.EXIT_INVALID
    assert out == ""
    assert "threshold_fidelity must exceed 0.5" in err


def test_one_line_per_violation(capsys):
    code, _, err = run(["solve", "--f-eps", "0.4", "--length-km", "-2"], capsys)
    assert code == cli.EXIT_INVALID
    assert len(err.strip().splitlines()) == 2


def test_sweep_range_validation(capsys):
    code, _, err = run(["sweep", "--from-km", "10", "--to-km", "4", "--step-km", "0"], capsys)
    assert code == cli.EXIT_INVALID
    assert len(err.strip().splitlines()) == 2


@pytest.mark.parametrize("argv", [["solve", "--bogus"], ["frobnicate"], ["solve", "--f0", "x"], []])
def test_usage_error_exit(argv, capsys):
    code, out, _ = run(argv, capsys)
    assert code == cli.EXIT_USAGE
    assert out == ""


def test_solver_failure_suppresses_output(monkeypatch, capsys):
    from pbgfid.errors import SolverError

    def boom(spec):
        raise SolverError("singular")

    monkeypatch.setitem(cli._RUNNERS, "solve", boom)
    code, out, err = run(["solve"], capsys)
    assert code == cli.EXIT_FAILED
    assert out == ""
    assert "singular" in err


# -- output ------------------------------------------------------------------

@pytest.mark.parametrize("command", ["solve", "cmf", "simulate", "sweep"])
def test_golden_headers(command, capsys):
    argv = [command] + ([] if command == "solve" else FAST)
    if command == "sweep":
        argv += ["--from-km", "14", "--to-km", "16", "--step-km", "2"]
    code, out, _ = run(argv, capsys)
    assert code == 0
    header = out.splitlines()[0]
    assert header == (GOLDEN / f"{command}_header.csv").read_text().strip()
    assert "\r" not in out
    for line in out.splitlines()[1:]:
        assert "" not in line.split(",")


def test_solve_row(capsys):
    _, out, _ = run(["solve", "--length-km", "15"], capsys)
    header, row = out.strip().split("\n")
    vals = dict(zip(header.split(","), row.split(",")))
    assert vals["N"] == "47"
    assert vals["n_states"] == "1224"
    assert vals["alpha"] == "0.05"
    assert float(vals["max_solver_diff"]) <= 1e-10
    assert float(vals["residual_full"]) <= 1e-9
    assert float(vals["residual_reduced"]) <= 1e-9


def test_nine_significant_digits(capsys):
    _, out, _ = run(["solve"], capsys)
    row = out.strip().split("\n")[1].split(",")
    assert row[1] == format(0.10539922456186433, ".9g")


def test_cmf_last_row(capsys):
    _, out, _ = run(["cmf"] + FAST, capsys)
    lines = out.strip().split("\n")
    assert len(lines) == 49
    last = lines[-1].split(",")
    assert float(last[0]) == 1.0 and float(last[1]) == 1.0


def test_simulate_baseline(capsys):
    code, out, _ = run(["simulate", "--policy", "replace-oldest"] + FAST, capsys)
    assert code == 0
    assert len(out.strip().split("\n")) == 49


def test_json_mirrors_csv(capsys):
    _, out, _ = run(["solve", "--format", "json"], capsys)
    doc = json.loads(out)
    assert set(doc) == {"spec", "rows"}
    assert list(doc["rows"][0]) == cli.SOLVE_FIELDS
    assert doc["spec"]["f_eps"] == 0.55
    assert doc["rows"][0]["N"] == 47


def test_output_file(tmp_path, capsys):
    target = tmp_path / "out.csv"
    code, out, _ = run(["solve", "-o", str(target)], capsys)
    assert code == 0 and out == ""
    assert target.read_bytes().startswith(b"distance_km,p_g")


def test_reproducible_bytes(capsys):
    argv = ["sweep", "--from-km", "10", "--to-km", "14", "--step-km", "2"] + FAST
    outs = [run(argv, capsys)[1] for _ in range(2)]
    outs.append(run(argv + ["--workers", "3"], capsys)[1])
    assert outs[0] == outs[1] == outs[2]
    distances = [line.split(",")[0] for line in outs[0].strip().split("\n")[1:]]
    assert distances == ["10", "12", "14"]


def test_sweep_4km_analytic_column(capsys):
    _, out, _ = run(["sweep", "--from-km", "4", "--to-km", "4", "--step-km", "1"] + FAST, capsys)
    header, row = out.strip().split("\n")
    vals = dict(zip(header.split(","), row.split(",")))
    assert vals["N"] == "173"
    assert 1 <= float(vals["pairs_pur_analytic"]) <= 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pbgfid", "solve", "--length-km", "10"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("distance_km,")
