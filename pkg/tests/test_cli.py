"""Command-line contract: parsing, determinism, exit codes, output layout."""

import numpy as np
import pytest

from dfsim.cli import (CSV_HEADER, ScenarioFileError, main,
                       parse_scenario_file)
from dfsim.liouville import DensityVector
from dfsim.spectral import SpectralKind

GOOD = """\
# upper level stabilization at strong positive bias
model.kind = lorentzian
model.gamma = 1.0
model.d = 10
model.eps0 = 0.2
model.mu = 10
model.T = 0.3
grid.dt = 0.004
grid.horizon = 3
init.state = v
"""


def _scenario(tmp_path, text=GOOD, name="scen.txt"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_csv_header_is_frozen():
    assert CSV_HEADER == ("t,re_u,im_u,abs_u,v,v_plus_u2,eps_tilde,gamma,"
                          "gamma_tilde,kappa,kappa_tilde,rho_vv,rho_pp,"
                          "re_rho_pm,im_rho_pm,rho_mm,rho_dd,purity")


def test_parse_good_scenario():
    cfg = parse_scenario_file(GOOD)
    assert cfg.model.kind is SpectralKind.LORENTZIAN
    assert cfg.model.d == 10.0
    assert cfg.model.mu == 10.0
    assert cfg.grid.dt == 0.004
    assert cfg.grid.horizon == pytest.approx(3.0)
    assert cfg.initial_state == "v"
    assert cfg.switch_tol == 1e-3  # defaults fill in


def test_parse_errors_name_line_and_key():
    with pytest.raises(ScenarioFileError, match="temperature"):
        parse_scenario_file("model.kind = lorentzian\nmodel.gamma = 1\nmodel.d = 2\n")
    with pytest.raises(ScenarioFileError, match=r"line 2.*model\.bogus"):
        parse_scenario_file("model.kind = wide-band\nmodel.bogus = 2\n")
    with pytest.raises(ScenarioFileError, match=r"line 3.*model\.gamma"):
        parse_scenario_file(
            "model.kind = wide-band\nmodel.gamma = 1\nmodel.gamma = 2\n")
    with pytest.raises(ScenarioFileError, match=r"line 4.*grid\.dt"):
        parse_scenario_file("model.kind = wide-band\nmodel.gamma = 1\n"
                            "model.T = 0.3\ngrid.dt = fast\n")
    with pytest.raises(ScenarioFileError, match="model.d"):
        parse_scenario_file(
            "model.kind = wide-band\nmodel.gamma = 1\nmodel.T = 0.3\nmodel.d = 2\n")
    with pytest.raises(ScenarioFileError, match="lorentzian"):
        parse_scenario_file("model.kind = square\n")
    with pytest.raises(ScenarioFileError, match="line 1"):
        parse_scenario_file("just some words\n")


def test_parse_superposition_initial():
    text = ("model.kind = lorentzian\nmodel.gamma = 1\nmodel.d = 10\n"
            "model.T = 0.3\ninit.alpha = 0.6\ninit.beta = 0.8j\n")
    cfg = parse_scenario_file(text)
    assert isinstance(cfg.initial_state, DensityVector)
    assert cfg.initial_state.components[1].real == pytest.approx(0.36)
    with pytest.raises(ScenarioFileError, match="both"):
        parse_scenario_file(text.replace("init.beta = 0.8j\n", ""))
    with pytest.raises(ScenarioFileError, match="conflicts"):
        parse_scenario_file(text + "init.state = v\n")


def test_run_writes_deterministic_outputs(tmp_path, capsys):
    scen = _scenario(tmp_path)
    assert main(["run", scen, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", scen, "--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    csv_a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    csv_b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert csv_a == csv_b
    rep_a = (tmp_path / "a" / "report.txt").read_bytes()
    rep_b = (tmp_path / "b" / "report.txt").read_bytes()
    assert rep_a == rep_b
    first = csv_a.decode().splitlines()
    assert first[0] == CSV_HEADER
    assert len(first) == 1 + 751  # header plus one row per grid node


def test_csv_columns_are_consistent(tmp_path, capsys):
    scen = _scenario(tmp_path)
    out = tmp_path / "out"
    assert main(["run", scen, "--out", str(out)]) == 0
    capsys.readouterr()
    data = np.genfromtxt(out / "trajectory.csv", delimiter=",", names=True)
    assert data["t"][0] == 0.0
    assert data["abs_u"][0] == 1.0
    assert data["rho_vv"][0] == 1.0
    # |u|^2 + v column equals the occupation column
    recon = data["re_u"] ** 2 + data["im_u"] ** 2 + data["v"]
    assert np.max(np.abs(recon - data["v_plus_u2"])) < 1e-9
    # rate sum identity survives the round-trip through text
    total = data["kappa"] + data["kappa_tilde"]
    assert np.max(np.abs(total - data["gamma"])) < 1e-9
    assert np.all(data["purity"] <= 1.0 + 1e-9)


def test_report_contains_classification(tmp_path, capsys):
    scen = _scenario(tmp_path)
    out = tmp_path / "rep"
    assert main(["run", scen, "--out", str(out)]) == 0
    capsys.readouterr()
    text = (out / "report.txt").read_text()
    assert "switch-off:" in text
    assert "late DF set:" in text
    assert "condition met:" in text
    assert "predicted stabilized state:" in text
    assert "achieved-state fidelity:" in text


def test_decoupled_run_is_flat(tmp_path, capsys):
    text = GOOD.replace("model.gamma = 1.0", "model.gamma = 0.0")
    out = tmp_path / "flat"
    assert main(["run", _scenario(tmp_path, text), "--out", str(out)]) == 0
    capsys.readouterr()
    data = np.genfromtxt(out / "trajectory.csv", delimiter=",", names=True)
    assert np.max(np.abs(data["abs_u"] - 1.0)) < 1e-12
    for col in ("gamma", "gamma_tilde", "kappa", "kappa_tilde", "v"):
        assert np.max(np.abs(data[col])) < 1e-12, col


def test_preset_run_fans_out(tmp_path, capsys):
    out = tmp_path / "fan"
    code = main(["run", "fig2a", "--out", str(out),
                 "--override", "grid.horizon=2", "--override", "grid.dt=0.005"])
    assert code == 0
    capsys.readouterr()
    for label in ("mu=-10", "mu=+0", "mu=+10"):
        assert (out / label / "trajectory.csv").exists()
        assert (out / label / "report.txt").exists()


def test_overrides_change_the_model(tmp_path, capsys):
    scen = _scenario(tmp_path)
    out = tmp_path / "ov"
    assert main(["run", scen, "--out", str(out),
                 "--override", "model.mu=-10"]) == 0
    capsys.readouterr()
    data = np.genfromtxt(out / "trajectory.csv", delimiter=",", names=True)
    assert data["v"][-1] < 0.05  # empty-band bias keeps the level empty
    assert main(["run", scen, "--out", str(tmp_path / "ov2"),
                 "--override", "model.bogus=1"]) == 1
    err = capsys.readouterr().err
    assert "model.bogus" in err


def test_exit_codes_and_diagnostics(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.txt"),
                 "--out", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert "scenario-parse" in err
    assert main(["presets"]) == 0
    listing = capsys.readouterr().out
    for name in ("fig1", "fig2a", "fig2c", "fig3a", "fig3c", "bm100"):
        assert name in listing


def test_sweep_writes_summary(tmp_path, capsys):
    scen = _scenario(tmp_path)
    out = tmp_path / "sw"
    code = main(["sweep", scen, "--param", "bias", "--values", "-10", "10",
                 "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0].startswith("value,steady_v,steady_n,switch,t_s,")
    assert len(lines) == 3
    assert (out / "bias=-10" / "trajectory.csv").exists()
    assert (out / "bias=10" / "trajectory.csv").exists()
    first = lines[1].split(",")
    assert float(first[0]) == -10.0
    assert float(first[1]) < 0.05


def test_sweep_failure_rows_set_exit_code(tmp_path, capsys):
    wb = ("model.kind = wide-band\nmodel.gamma = 1\nmodel.T = 0.3\n"
          "grid.dt = 0.005\ngrid.horizon = 3\n")
    out = tmp_path / "swb"
    code = main(["sweep", _scenario(tmp_path, wb, "wb.txt"), "--param",
                 "bandwidth", "--values", "2", "--out", str(out)])
    assert code == 1
    err = capsys.readouterr().err
    assert "configuration" in err
    assert (out / "summary.csv").read_text().splitlines()[1].endswith(
        "configuration")


def test_bm_compare_cli(tmp_path, capsys):
    scen = _scenario(tmp_path)
    out = tmp_path / "bm"
    code = main(["bm-compare", scen, "--out", str(out),
                 "--override", "model.d=100", "--override", "grid.horizon=6",
                 "--override", "grid.dt=0.002"])
    assert code == 0
    capsys.readouterr()
    text = (out / "comparison.txt").read_text()
    assert "classification match: True" in text
    assert "comparison window" in text


def test_precision_flag_controls_digits(tmp_path, capsys):
    scen = _scenario(tmp_path)
    out = tmp_path / "prec"
    assert main(["run", scen, "--out", str(out), "--precision", "4"]) == 0
    capsys.readouterr()
    row = (out / "trajectory.csv").read_text().splitlines()[2]
    cell = row.split(",")[1]  # re_u just below 1: four significant digits
    assert len(cell.replace("-", "").replace(".", "").lstrip("0")) <= 4
    assert main(["run", scen, "--out", str(out), "--precision", "0"]) == 2
