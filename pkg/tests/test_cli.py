"""Config parsing, validation and end-to-end subcommand artifacts."""

import os

import pytest

from sldg.cli import main, parse_config, read_config_file
from sldg.errors import ConfigError


def test_minimal_config_file_fills_defaults(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("cmd = charge\nj = 32\nk = 1\ndt = 0.001\nt_final = 1.0\n")
    cfg = parse_config(["--config", str(cfg_file)])
    assert cfg.cmd == "charge"
    assert cfg.j == 32 and cfg.k == 1
    assert cfg.left == 0.0 and cfg.right == 1.0
    assert cfg.modes == 32 and cfg.decay == 4.0
    assert cfg.samples == 100
    assert cfg.q == "cos"


def test_unknown_key_rejected_by_name(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("cmd = charge\ntheta = 0.5\n")
    with pytest.raises(ConfigError, match="theta"):
        read_config_file(str(cfg_file))


def test_type_mismatch_names_key(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("cmd = charge\nj = lots\n")
    with pytest.raises(ConfigError, match="'j'"):
        read_config_file(str(cfg_file))


def test_dt_above_one_rejected():
    with pytest.raises(ConfigError, match="dt"):
        parse_config(["charge", "--dt", "1.5"])


def test_flag_overrides_file(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("cmd = charge\nj = 8\n")
    cfg = parse_config(["--config", str(cfg_file), "--j", "64"])
    assert cfg.j == 64


def test_comments_and_blank_lines(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("# experiment\n\ncmd = noise-check  # trailing\n")
    assert read_config_file(str(cfg_file)) == {"cmd": "noise-check"}


def test_env_seed_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("SLDG_SEED", "777")
    cfg = parse_config(["noise-check"])
    assert cfg.seed == 777
    monkeypatch.delenv("SLDG_SEED")
    cfg2 = parse_config(["noise-check", "--seed", "5"])
    assert cfg2.seed == 5


def test_missing_command_rejected():
    with pytest.raises(ConfigError, match="cmd"):
        parse_config(["--j", "8"])


def test_temporal_order_requires_constant_q():
    with pytest.raises(ConfigError, match="'q'"):
        parse_config(["temporal-order", "--q", "cos"])
    cfg = parse_config(["temporal-order"])
    assert float(cfg.q) == 1.0


def test_noise_check_command(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["noise-check", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out.strip().splitlines()
    assert printed[-1].startswith("RESULT cmd=noise-check")
    assert printed[-1].endswith("pass=1")
    table = (out / "noise_check.csv").read_text().splitlines()
    assert table[0].startswith("dt,kappa,tail_moment,bound")
    assert len(table) == 5


def test_charge_command_and_reproducibility(tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["charge", "--j", "8", "--dt", "0.01", "--t-final", "0.1", "--samples", "1"]
    assert main(args + ["--out", str(out1), "--seed", "3"]) == 0
    assert main(args + ["--out", str(out2), "--seed", "3"]) == 0
    assert capsys.readouterr().out.count("pass=1") == 2
    csv1 = (out1 / "charge.csv").read_bytes()
    csv2 = (out2 / "charge.csv").read_bytes()
    assert csv1 == csv2
    plot = (out1 / "plot_charge.py").read_text()
    assert "matplotlib" in plot
    assert not (out1 / "charge.png").exists()  # plot scripts are emitted, not run


def test_run_command_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--j", "8", "--dt", "0.01", "--t-final", "0.05",
                 "--out", str(out), "--seed", "1"])
    assert code == 0
    assert (out / "trajectory.csv").exists()
    assert (out / "snapshot.csv").exists()
    assert (out / "plot_trajectory.py").exists()
    head = (out / "trajectory.csv").read_text().splitlines()[0]
    assert head == "n,t,charge,linres"


def test_invalid_config_exit_code(capsys):
    assert main(["charge", "--j", "1"]) == 1
    err = capsys.readouterr().err
    assert "'j'" in err


def test_spatial_order_quick(tmp_path, capsys):
    out = tmp_path / "sp"
    code = main(["spatial-order", "--j", "32", "--k", "1", "--dt", "0.002",
                 "--t-final", "0.1", "--out", str(out), "--seed", "2"])
    assert code == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("RESULT cmd=spatial-order")
    assert (out / "spatial_order.csv").exists()
    assert (out / "plot_spatial_order.py").exists()


def test_temporal_order_quick(tmp_path, capsys):
    out = tmp_path / "tmp"
    code = main(["temporal-order", "--t-final", "0.5", "--samples", "8",
                 "--out", str(out), "--seed", "4"])
    assert code == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("RESULT cmd=temporal-order")
    assert "slope=" in line
    assert (out / "temporal_order.csv").exists()


def test_regularity_quick(tmp_path, capsys):
    out = tmp_path / "reg"
    code = main(["regularity", "--t-final", "0.25", "--samples", "6",
                 "--out", str(out), "--seed", "8"])
    assert code == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("RESULT cmd=regularity")
    assert (out / "regularity_holder.csv").exists()
    assert (out / "regularity_moment.csv").exists()
