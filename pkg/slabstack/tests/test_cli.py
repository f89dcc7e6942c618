# pylint: skip-file
import io
import json
import math
from unittest.mock import patch
import pandas as pd
import pytest
from slabstack import __version__
from slabstack.cli import main
from slabstack.errors import ConvergenceError, CrossCheckMismatch
from slabstack.services.bounds import BoundsService


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_exact_n3(capsys):
    code, out = run(capsys, "exact", "--tau1", "0.85", "--n", "3")
    assert code == 0
    frame = pd.read_csv(io.StringIO(out))
    assert len(frame) == 1
    assert frame["mean_tau3"][0] == pytest.approx(0.650803, abs=1e-6)
    assert frame["ray"][0] == pytest.approx(0.653846, abs=1e-6)


def test_exact_n200(capsys):
    code, out = run(capsys, "exact", "--tau1", "0.85", "--n", "200")
    assert code == 0
    frame = pd.read_csv(io.StringIO(out))
    assert frame["mean_log_tau"][0] == pytest.approx(-32.5038, abs=1e-4)
    assert math.isnan(frame["mean_tau2"][0])


def test_exact_prints_full_precision(capsys):
    _, out = run(capsys, "exact", "--tau1", "0.85", "--n", "2")
    frame = pd.read_csv(io.StringIO(out))
    assert frame["mean_tau2"][0] == 0.85 / (2 - 0.85)


def test_exact_json(capsys):
    code, out = run(capsys, "exact", "--tau1", "0.85", "--n", "2", "--format", "json")
    assert code == 0
    records = json.loads(out)
    assert records[0]["n_slabs"] == 2
    assert records[0]["mean_tau3"] is None


def test_exact_table(capsys):
    code, out = run(capsys, "exact", "--tau1", "0.5", "--n", "2", "--format", "table")
    assert code == 0
    assert out.strip()


@pytest.mark.parametrize("tau1", ["1.5", "0", "-0.2", "nan"])
def test_invalid_tau1_exits_2(capsys, tau1):
    code, out = run(capsys, "exact", "--tau1", tau1, "--n", "3")
    assert code == 2
    assert out == ""


def test_missing_arguments_exit_2(capsys):
    assert run(capsys, "recurrence", "--n-max", "5")[0] == 2
    assert run(capsys, "montecarlo", "--tau1", "0.85", "--n", "2")[0] == 2
    assert run(capsys, "figure", "fig6", "--n-max", "3")[0] == 2
    assert run(capsys, "recurrence", "--tau1", "0.85", "--n-max", "5", "--quad-nodes", "9")[0] == 2
    assert run(capsys, "exact", "--tau1", "0.85", "--n", "2", "--log-level", "LOUD")[0] == 2


def test_missing_n_is_rejected_by_the_parser():
    with pytest.raises(SystemExit) as info:
        main(["exact", "--tau1", "0.85"])
    assert info.value.code == 2


def test_recurrence_anchor(capsys):
    code, out = run(capsys, "recurrence", "--tau1", "0.85", "--n-max", "2")
    assert code == 0
    frame = pd.read_csv(io.StringIO(out))
    assert frame["N"].tolist() == [2]
    assert frame["value"][0] == pytest.approx(0.739130, abs=1e-6)
    assert frame["log_value"][0] == pytest.approx(math.log(0.85 / 1.15), abs=1e-6)


def test_recurrence_linear_target(capsys):
    code, out = run(capsys, "recurrence", "--tau1", "0.85", "--n-max", "5", "--target", "logtau")
    assert code == 0
    frame = pd.read_csv(io.StringIO(out))
    assert frame["N"].tolist() == [2, 3, 4, 5]
    assert frame["log_value"].isna().all()
    assert frame["value"].iloc[-1] == pytest.approx(5 * math.log(0.85), abs=1e-6)


def test_montecarlo_single_slab(capsys):
    code, out = run(capsys, "montecarlo", "--tau1", "0.85", "--n", "1", "--trials", "1")
    assert code == 0
    frame = pd.read_csv(io.StringIO(out))
    assert frame["mean_tau"][0] == 0.85
    assert frame["trials"][0] == 1


def test_montecarlo_is_reproducible(capsys):
    argv = ["montecarlo", "--tau1", "0.85", "--n", "2", "5", "--trials", "300", "--seed", "3"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == second[0] == 0
    assert first[1] == second[1]
    assert pd.read_csv(io.StringIO(first[1]))["N"].tolist() == [2, 5]


@pytest.mark.parametrize("workers", ["4", "16"])
def test_montecarlo_output_ignores_worker_count(capsys, workers):
    argv = ["montecarlo", "--tau1", "0.85", "--n", "2", "7", "--trials", "640", "--seed", "5"]
    serial = run(capsys, *argv, "--workers", "1")
    pooled = run(capsys, *argv, "--workers", workers)
    assert serial[0] == pooled[0] == 0
    assert pooled[1].encode() == serial[1].encode()


def test_out_writes_sidecar(capsys, tmp_path):
    out = tmp_path / "runs" / "exact.csv"
    code, printed = run(capsys, "exact", "--tau1", "0.85", "--n", "3", "--out", str(out))
    assert code == 0
    assert printed == ""
    assert pd.read_csv(out)["n_slabs"][0] == 3
    meta = json.loads((tmp_path / "runs" / "exact.meta.json").read_text())
    assert meta["command"] == "exact"
    assert meta["tool_version"] == __version__
    assert meta["flags"]["tau1"] == 0.85
    assert meta["flags"]["n"] == [3]
    assert meta["derived_constants"]["C"] == pytest.approx(2 / 0.85 - 1)
    assert meta["derived_constants"]["lambda"] == pytest.approx(1 / 1.15)
    assert 0 < meta["derived_constants"]["upsilon"] < 1


def test_convergence_failure_exits_3(capsys):
    with patch(
        "slabstack.services.recurrence.RecurrenceService.average_series",
        side_effect=ConvergenceError("quadrature did not settle"),
    ):
        code, out = run(capsys, "recurrence", "--tau1", "0.85", "--n-max", "5")
    assert code == 3
    assert out == ""


def test_cross_check_mismatch_exits_4(capsys):
    error = CrossCheckMismatch("tau differs", seed=1, stream_id=0, trial=5, phases=[0.1])
    with patch("slabstack.services.montecarlo.MonteCarloService.run_mc", side_effect=error):
        code, _ = run(capsys, "montecarlo", "--tau1", "0.85", "--n", "2", "--trials", "10")
    assert code == 4


def test_fig5_small_grid(capsys):
    code, out = run(capsys, "figure", "fig5", "--grid-points", "4")
    assert code == 0
    frame = pd.read_csv(io.StringIO(out))
    assert frame.columns.tolist() == ["tau1", "upsilon", "lambda", "tau1_line"]
    assert frame["tau1"].tolist() == [0.25, 0.5, 0.75, 1.0]
    last = frame.iloc[-1]
    assert last["upsilon"] == 1.0 and last["lambda"] == 1.0
    assert (frame["lambda"] <= frame["upsilon"]).all()


def test_fig5_sidecar_cross_checks_both_factors(capsys, tmp_path):
    out = tmp_path / "fig5.csv"
    code, _ = run(capsys, "figure", "fig5", "--grid-points", "4", "--out", str(out))
    assert code == 0
    estimates = json.loads((tmp_path / "fig5.meta.json").read_text())["error_estimates"]
    assert len(estimates["upsilon"]) == len(estimates["lambda"]) == 4
    assert all(value < 1e-10 for value in estimates["upsilon"])
    assert all(value < 1e-5 for value in estimates["lambda"])


def test_fig4_columns(capsys):
    code, out = run(capsys, "figure", "fig4", "--n-max", "6", "--trials", "640", "--seed", "2")
    assert code == 0
    frame = pd.read_csv(io.StringIO(out))
    assert frame.columns.tolist() == ["N", "log_recurrence", "log_mc", "mc_se", "log_upper", "log_lower", "log_bk"]
    assert frame["N"].tolist() == [2, 3, 4, 5, 6]
    assert (frame["log_lower"] <= frame["log_upper"] + 1e-12).all()
    assert (abs(frame["log_recurrence"] - frame["log_mc"]) < 0.1).all()


def test_fig6_with_trend_report(capsys, tmp_path):
    out = tmp_path / "fig6.csv"
    code, _ = run(capsys, "figure", "fig6", "--n-max", "60", "--out", str(out))
    assert code == 0
    frame = pd.read_csv(out)
    assert frame.columns.tolist() == ["N", "r_N", "A_N", "upsilon_line", "lambda_line"]
    assert frame["N"].iloc[0] == 3 and frame["N"].iloc[-1] == 60
    assert math.isnan(frame["A_N"].iloc[-1])
    assert ((frame["r_N"] >= frame["lambda_line"]) & (frame["r_N"] <= frame["upsilon_line"])).all()
    meta = json.loads((tmp_path / "fig6.meta.json").read_text())
    assert meta["command"] == "figure fig6"
    assert "Conjecture trend" in meta["trend_report"]
    assert len(meta["error_estimates"]["log_recurrence"]) == len(frame)
    diagnostics = meta["diagnostics"]
    assert diagnostics["first_ray_violation"] == BoundsService.first_ray_violation(0.85)
    assert len(diagnostics["successive_ratio"]) == 59
    assert all(0 < value < 1 for value in diagnostics["successive_ratio"].values())
    assert diagnostics["root_rate"]["1"] == pytest.approx(0.85, rel=1e-14)
