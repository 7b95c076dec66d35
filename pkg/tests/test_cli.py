import csv
import subprocess
import sys

import pytest

from irsrelay.cli import build_network, main, parse_n_grid, read_config
from irsrelay.errors import ConfigError
from irsrelay.experiments import flop_count_lc, flop_count_ons


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_complexity_csv(tmp_path):
    out = tmp_path / "fig.csv"
    assert main(["complexity", "--m", "2", "--n-grid", "16:1024:x2", "--d", "6", "--eps", "0.1",
                 "--out", str(out)]) == 0
    rows = _read(out)
    assert rows[0] == ["n", "lc_flops", "ons_flops"]
    assert [int(r[0]) for r in rows[1:]] == [16, 32, 64, 128, 256, 512, 1024]
    for n, a, b in rows[1:]:
        assert float(a) == flop_count_lc(2, int(n), 6, 0.1)
        assert float(b) == flop_count_ons(2, int(n), 6, 0.1)


def test_complexity_to_stdout(capsys):
    assert main(["complexity", "--n-grid", "16,32"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "n,lc_flops,ons_flops"


@pytest.mark.parametrize("text,want", [("16:64:x2", [16, 32, 64]), ("4,8", [4, 8]), ("2:6:2", [2, 4, 6])])
def test_parse_n_grid(text, want):
    assert parse_n_grid(text) == want


def test_bad_grid_is_config_error(capsys):
    assert main(["complexity", "--n-grid", "16:64:x1"]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["single-run", "--config", str(tmp_path / "nope.cfg")]) == 1
    assert "not found" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("m = 2\nwarp_drive = 9\n")
    assert main(["single-run", "--config", str(cfg)]) == 1
    assert "warp_drive" in capsys.readouterr().err


def test_invalid_network_value(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("relay = 0 0 0\n")  # same place as the first user
    assert main(["single-run", "--config", str(cfg), "--algo", "relay"]) == 1


def test_config_file_parsed(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nm = 3\np_dbm = 20  # inline\nalpha_ir = 2.2\nsafeguard = off\n")
    s = read_config(path)
    assert s == {"m": 3, "p_dbm": 20.0, "alpha_ir": 2.2, "safeguard": False}
    net = build_network(s)
    assert net.m == 3 and net.alpha["ir"] == 2.2 and net.p_total == pytest.approx(0.1)


def test_config_aliases(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("p_total_dbm = 25\npos.relay = 5 60 10\n")
    assert read_config(path) == {"p_dbm": 25.0, "relay": (5.0, 60.0, 10.0)}


def test_bad_config_value(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("m = two\n")
    with pytest.raises(ConfigError):
        read_config(cfg)


def test_converge_writes_one_trace_per_algorithm(tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["converge", "--p-dbm", "30", "--seed", "7", "--algo", "both", "--n", "4",
                 "--max-outer", "3", "--out", str(out)]) == 0
    lc, ons = _read(tmp_path / "trace_lc.csv"), _read(tmp_path / "trace_ons.csv")
    assert lc[0][:4] == ["iteration", "r12", "r21", "min_rate"]
    assert "xi1" in ons[0] and "lambda_ratio_2" in ons[0]
    assert 1 <= len(lc) - 1 <= 3 and 1 <= len(ons) - 1 <= 3


def test_converge_rejects_baselines():
    assert main(["converge", "--algo", "random", "--n", "4"]) == 1


def test_single_run_byte_identical(tmp_path):
    args = ["single-run", "--seed", "3", "--n", "4", "--max-outer", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _read(a)
    assert [r[0] for r in rows[1:]] == ["lc", "ons", "random", "relay"]
    assert len({r[3] for r in rows[1:]}) == 1  # one shared channel


def test_sweep_writes_rows_and_summary(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["sweep-power", "--grid", "20,30", "--trials", "2", "--n", "4", "--algo", "random",
                 "--out", str(out)]) == 0
    rows = _read(out)
    assert rows[0] == ["param", "value", "trial", "algo", "rate_bps_hz", "iters", "fail"]
    assert len(rows) == 1 + 2 * 2
    summary = _read(tmp_path / "p.summary.csv")
    assert summary[0][:3] == ["param", "value", "algo"] and len(summary) == 3


def test_trial_exhaustion_exit_code(tmp_path, capsys):
    assert main(["single-run", "--m", "1", "--n", "4", "--algo", "relay"]) == 2
    assert main(["sweep-antennas", "--grid", "1", "--trials", "1", "--n", "4", "--algo", "relay",
                 "--out", str(tmp_path / "m.csv")]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "irsrelay", "complexity", "--n-grid", "16"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("n,lc_flops,ons_flops")
