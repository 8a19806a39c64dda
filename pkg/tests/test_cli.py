import json
from pathlib import Path

import pytest

from partint import cli

DATA = Path(__file__).parent / "data"


def test_catalog_list(capsys):
    assert cli.main(["catalog", "list"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert "projectile_friction" in names and "free_particle" in names


def test_catalog_run_writes_outputs(tmp_path):
    assert cli.main(["catalog", "run", "cocontact_good", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["schema_version"] == 1 and doc["status"] == 0
    assert (tmp_path / "summary.csv").read_text().startswith("id,stage,check")
    assert (tmp_path / "trajectories" / "traj_start.csv").exists()


def test_run_overrides_recorded(tmp_path):
    args = ["run", str(DATA / "broken_candidate.json"), "--out", str(tmp_path),
            "--seed", "4", "--rtol", "1e-8"]
    cli.main(args)
    settings = json.loads((tmp_path / "report.json").read_text())["settings"]
    assert settings["sample_plan"]["seed"] == 4
    assert settings["integrator"]["rtol"] == 1e-8


def test_broken_scenario_exit_one(tmp_path, capsys):
    code = cli.main(["run", str(DATA / "broken_candidate.json"), "--out", str(tmp_path)])
    assert code == 1
    assert "p:particular_integral" in capsys.readouterr().err


@pytest.mark.parametrize("name", ["chart_mismatch.json", "malformed.json", "absent.json"])
def test_invalid_scenario_exit_two_and_no_output(tmp_path, name, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", str(DATA / name), "--out", str(out)]) == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_check_command(capsys):
    assert cli.main(["check", str(DATA / "broken_candidate.json")]) == 0
    assert "valid" in capsys.readouterr().out
    assert cli.main(["check", str(DATA / "chart_mismatch.json")]) == 2


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["catalog"],
                                  ["run", "x.json", "--rtol", "-1"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 2


def test_unknown_catalog_name(capsys):
    assert cli.main(["catalog", "run", "nope"]) == 2
    assert "available" in capsys.readouterr().err
