"""CLI smoke tests over the bundled configs."""

import json

from unfoldrx import bench
from unfoldrx.cli import main


def test_complexity_command(tmp_path, capsys):
    out = tmp_path / "report.json"
    rc = main(["complexity", "--bs-antennas", "4", "--users", "4",
               "--out", str(out)])
    assert rc == 0
    rep = json.loads(out.read_text())
    assert len(rep["rows"]) == 5


def test_sweep_command_writes_csv(tmp_path):
    rc = main(["sweep", "--config", "baseline_lmmse", "--out", str(tmp_path),
               "--frames", "2", "--snr", "5.0", "--threads", "1"])
    assert rc == 0
    csvs = list(tmp_path.glob("*_results.csv"))
    assert len(csvs) == 1
    lines = csvs[0].read_text().splitlines()
    assert lines[0] == ",".join(bench.CSV_COLUMNS)
    assert len(lines) == 2


def test_unknown_config_is_error(capsys):
    rc = main(["sweep", "--config", "does_not_exist"])
    assert rc == 2
    assert "config not found" in capsys.readouterr().err


def test_run_command_writes_artifacts(tmp_path):
    rc = main(["run", "--config", "classical_idd_I2", "--out", str(tmp_path),
               "--frames", "2", "--snr", "4.0", "--threads", "1"])
    assert rc == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert "classical_idd_I2_results.csv" in names
    assert "classical_idd_I2_params.json" in names
    assert "classical_idd_I2_metadata.json" in names
    meta = json.loads((tmp_path / "classical_idd_I2_metadata.json").read_text())
    assert meta["seed"] == 0
    assert len(meta["complexity"]["rows"]) == 5
