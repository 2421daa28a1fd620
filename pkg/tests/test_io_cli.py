import csv
import math

import numpy as np
import pytest

from rrr_ekf.aircraft import builtin_model
from rrr_ekf.cli import main
from rrr_ekf.errors import ConfigError, DatasetError
from rrr_ekf.io import (REPORT_FILES, RunConfig, channel_kind, load_report_state, read_dataset,
                        read_run_config, save_report_state, write_dataset, write_report)
from rrr_ekf.simulator import SimConfig, simulate_dataset

CASE1 = builtin_model(1)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


@pytest.fixture(scope="module")
def small_sim():
    return simulate_dataset(SimConfig(case=1, N=200, seed=3))


@pytest.mark.parametrize("units", ["internal", "display"])
def test_dataset_round_trip(tmp_path, small_sim, units):
    path = tmp_path / "d.csv"
    write_dataset(small_sim.data, path, CASE1, units=units)
    back = read_dataset(path, CASE1)
    if units == "internal":
        assert np.array_equal(back.Z, small_sim.data.Z)
    else:
        assert np.allclose(back.Z, small_sim.data.Z, rtol=1e-14, atol=1e-17)
    assert np.array_equal(back.times, small_sim.data.times)
    for name in CASE1.input_names:
        assert np.allclose(back.channels[name].values, small_sim.data.channels[name].values,
                           rtol=1e-14, atol=1e-17)


def test_degree_columns_are_converted(tmp_path, small_sim):
    path = tmp_path / "d.csv"
    write_dataset(small_sim.data, path, CASE1)
    rows = _rows(path)
    j = rows[0].index("alpha_rad")
    rows[0][j] = "alpha_deg"
    rows[1][j] = "5"
    _write_rows(path, rows)
    assert read_dataset(path, CASE1).Z[0, 0] == pytest.approx(0.0872665, abs=1e-7)


def test_shuffled_rows_report_index(tmp_path, small_sim):
    path = tmp_path / "d.csv"
    write_dataset(small_sim.data, path, CASE1)
    rows = _rows(path)
    rows[5], rows[6] = rows[6], rows[5]
    _write_rows(path, rows)
    # list entries 5 and 6 are file rows 6 and 7 (data indices 4 and 5);
    # the first sample earlier than its predecessor is data index 5
    with pytest.raises(DatasetError, match=r"data index 5 \(file row 7\)"):
        read_dataset(path, CASE1)


def test_missing_column_is_named(tmp_path, small_sim):
    path = tmp_path / "d.csv"
    write_dataset(small_sim.data, path, CASE1)
    rows = _rows(path)
    j = rows[0].index("q_radps")
    _write_rows(path, [r[:j] + r[j + 1:] for r in rows])
    with pytest.raises(DatasetError, match="'?q'?"):
        read_dataset(path, CASE1)


def test_unknown_unit_is_named(tmp_path, small_sim):
    path = tmp_path / "d.csv"
    write_dataset(small_sim.data, path, CASE1)
    rows = _rows(path)
    rows[0][rows[0].index("q_radps")] = "q_furlongs"
    _write_rows(path, rows)
    with pytest.raises(DatasetError, match="furlongs"):
        read_dataset(path, CASE1)


def test_bad_cells_report_row(tmp_path, small_sim):
    path = tmp_path / "d.csv"
    write_dataset(small_sim.data, path, CASE1)
    rows = _rows(path)
    rows[3][2] = "abc"
    _write_rows(path, rows)
    with pytest.raises(DatasetError, match="row 4"):
        read_dataset(path, CASE1)
    with pytest.raises(DatasetError):
        read_dataset(tmp_path / "absent.csv", CASE1)


def test_channel_kinds():
    assert channel_kind("alpha_m") == "angle"
    assert channel_kind("delta_e") == "angle"
    assert channel_kind("p_m") == "rate"
    assert channel_kind("an") == "accel"


def test_report_files(tmp_path, case1_report):
    paths = write_report(case1_report, tmp_path / "rep")
    assert [p.rsplit("/", 1)[-1] for p in paths] == list(REPORT_FILES)
    theta = _rows(tmp_path / "rep" / "theta.csv")
    assert len(theta) == 1 + 13 and theta[1][0] == "C_N_alpha"
    corr = _rows(tmp_path / "rep" / "corr100.csv")
    assert all(corr[i + 1][i + 1] == "100" for i in range(13))
    costs = _rows(tmp_path / "rep" / "costs.csv")
    assert len(costs) - 1 == case1_report.iterations
    traj = _rows(tmp_path / "rep" / "trajectory.csv")
    assert len(traj) - 1 == case1_report.times.size
    flags = (tmp_path / "rep" / "flags.txt").read_text().splitlines()
    assert flags[0] == "method: reference"


def test_report_state_round_trip(tmp_path, case1_report):
    state = tmp_path / "s.json"
    save_report_state(case1_report, state)
    write_report(case1_report, tmp_path / "a")
    write_report(load_report_state(state), tmp_path / "b")
    for name in REPORT_FILES:
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text(), name
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_report_state(tmp_path / "bad.json")


def test_run_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\ncase = 2\nqbar = 190.16  # lbf/ft^2\niterations = 7\n"
                 "em_cross_terms = no\nacceleration = none\n")
    cfg = read_run_config(p)
    assert (cfg.case, cfg.qbar, cfg.iterations, cfg.em_cross_terms) == (2, 190.16, 7, False)
    assert cfg.recipe().max_iterations == 7 and cfg.recipe().acceleration == "none"
    assert cfg.model().constants.qbar == 190.16
    p.write_text("case = 1\nspeed = 3\n")
    with pytest.raises(ConfigError, match=":2: unknown"):
        read_run_config(p)
    p.write_text("iterations = many\n")
    with pytest.raises(ConfigError):
        read_run_config(p)
    with pytest.raises(ConfigError):
        RunConfig(method="ml")


def test_cli_simulate_fit_report(tmp_path):
    data = tmp_path / "d.csv"
    assert main(["simulate", "--case", "1", "--N", "300", "--out", str(data)]) == 0
    assert (tmp_path / "d.csv.truth.json").exists()
    out = tmp_path / "fit"
    state = tmp_path / "state.json"
    assert main(["fit", str(data), "--iterations", "2", "--out", str(out), "--state", str(state)]) == 0
    assert all((out / n).exists() for n in REPORT_FILES)
    assert main(["report", str(state), "--out", str(tmp_path / "again")]) == 0
    assert (out / "theta.csv").read_text() == (tmp_path / "again" / "theta.csv").read_text()


def test_cli_exit_codes(tmp_path, capsys):
    assert main([]) == 2
    assert main(["fit"]) == 2
    data = tmp_path / "d2.csv"
    assert main(["simulate", "--case", "2", "--N", "200", "--out", str(data)]) == 0
    capsys.readouterr()
    assert main(["fit", str(data), "--case", "2", "--out", str(tmp_path / "o")]) == 2
    assert "qbar" in capsys.readouterr().err
    # a case-2 record read as case 1 lacks the case-1 channels
    assert main(["fit", str(data), "--case", "1", "--out", str(tmp_path / "o")]) == 2
    # sideslip at 90 degrees makes the case-2 equations singular
    rows = _rows(data)
    j = rows[0].index("beta_m_rad")
    for r in rows[1:]:
        r[j] = repr(math.pi / 2)
    _write_rows(data, rows)
    code = main(["fit", str(data), "--case", "2", "--qbar", "190.16", "--iterations", "1",
                 "--out", str(tmp_path / "o")])
    assert code == 3
    assert main(["report", str(tmp_path / "missing.json"), "--out", str(tmp_path / "r")]) == 2


def test_cli_compare_shape(tmp_path, monkeypatch):
    monkeypatch.setenv("RRR_EKF_THREADS", "1")
    data = tmp_path / "d.csv"
    assert main(["simulate", "--case", "1", "--N", "300", "--out", str(data)]) == 0
    out = tmp_path / "cmp"
    assert main(["compare", str(data), "--iterations", "2", "--out", str(out)]) == 0
    theta = _rows(out / "compare_theta.csv")
    assert theta[0] == ["name", "reference", "mt", "ms"]
    assert len(theta) == 1 + 13 and all(len(r) == 4 for r in theta)
    for m in ("reference", "mt", "ms"):
        assert (out / m / "theta.csv").exists()
