import csv
import io

import pytest

from actionrd import multiplex
from actionrd.cli import main


def _rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def _headers(text):
    return [line for line in text.splitlines() if line.startswith("#")]


def test_sweep_is_byte_identical(tmp_path):
    args = ["sweep", "--s-grid=-1,-4", "--m-grid=-0.5,-2", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_text()
    assert a == (tmp_path / "b" / "sweep.csv").read_text()
    heads = _headers(a)
    assert heads[0] == "# actionrd 0.1.0"
    assert any(h.startswith("# config-hash: ") for h in heads)
    assert "# seed: 3" in heads
    rows = _rows(a)
    assert len(rows) == 4
    assert list(rows[0]) == ["s", "m", "R", "D", "C", "converged", "iters"]


def test_point_schema_and_zero_slopes(tmp_path, capsys):
    assert main(["point", "--s", "0", "--m", "0"]) == 0
    text = capsys.readouterr().out
    row = _rows(text)[0]
    assert float(row["R"]) == 0.0
    assert list(row) == ["s", "m", "R", "D", "C", "converged", "iters"]
    assert main(["point", "--s", "-50", "--out", str(tmp_path)]) == 0
    assert main(["point", "--s", "-1", "--m", "-1", "--out", str(tmp_path)]) == 0
    rows = _rows((tmp_path / "points.csv").read_text())
    assert len(rows) == 2 and float(rows[0]["D"]) <= 1e-3


def test_analytic_values_and_domain(capsys):
    assert main(["analytic", "--D-grid", "0,0.1", "--C-list", "1,0.25"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows[0]["R"]) == 0.0
    assert float(rows[3]["R"]) == pytest.approx(0.2411533, abs=1e-6)
    assert main(["analytic", "--p", "0.1"]) == 2


def test_dmax_command(capsys):
    assert main(["dmax", "--C-list", "0,1"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows[0]["D_max"]) == pytest.approx(0.375)
    assert float(rows[1]["D_max"]) == pytest.approx(0.0)


def test_configuration_errors(tmp_path):
    assert main(["sweep", "--scenario", str(tmp_path / "nope.toml")]) == 2
    assert main(["point", "--s", "1"]) == 2
    assert main(["codes", "--D", "0.1"]) == 2
    assert main(["nosuchcommand"]) == 2
    cfg = tmp_path / "c.toml"
    cfg.write_text("bogus = 1\n")
    assert main(["dmax", "--config", str(cfg)]) == 2


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('C_list = [0.5]\nK = 2\n')
    assert main(["dmax", "--config", str(cfg)]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 1 and float(rows[0]["C"]) == 0.5
    assert main(["dmax", "--config", str(cfg), "--C-list", "0"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows[0]["D_max"]) == pytest.approx(0.25)   # K = 2 from the file


def test_unconverged_sweep_exit_code(tmp_path):
    args = ["sweep", "--s-grid=-2", "--m-grid=-1", "--max-outer", "2", "--out", str(tmp_path)]
    assert main(args) == 3
    assert main(args + ["--allow-unconverged"]) == 0


BINARY = """
name = "binary"
x = ["0", "1"]
y = ["0", "1"]
a = ["cheap", "sharp"]
px = [0.5, 0.5]
cost = [0.0, 1.0]
distortion = [[0, 1], [1, 0]]

[channel]
cheap = [[0.75, 0.25], [0.25, 0.75]]
sharp = [[0.95, 0.05], [0.05, 0.95]]
"""


def test_codes_outputs_and_check_failure(tmp_path, monkeypatch):
    scen = tmp_path / "binary.toml"
    scen.write_text(BINARY)
    args = ["codes", "--scenario", str(scen), "--D", "0.08", "--C", "0.5", "--n", "40", "--trials", "3",
            "--mode", "codebook", "--eps", "0.2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    summary = _rows((tmp_path / "a" / "summary.csv").read_text())[0]
    assert summary["converse_ok"] == "1"
    assert float(summary["rate"]) >= float(summary["bound_at_corner"])
    trials = _rows((tmp_path / "a" / "trials.csv").read_text())
    assert [r["trial"] for r in trials] == ["0", "1", "2", "mean"]
    monkeypatch.setattr(multiplex, "converse_check", lambda report, curve: (False, 9.0))
    assert main(args + ["--out", str(tmp_path / "b")]) == 4
