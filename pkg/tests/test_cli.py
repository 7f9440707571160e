"""CLI behavior via click's test runner: exit codes, output shapes, and
the full record -> validate -> replay -> stats -> align tool chain."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from dexmouse.cli import main

PING_HEX = "ff ff fd 00 01 03 00 01 19 4e"


@pytest.fixture()
def runner():
    return CliRunner()


def record_via_cli(runner, tmp_path, cycles: int = 200) -> Path:
    script = {
        "duration_cycles": cycles,
        "commands": [
            {"cycle": 0, "command": {"type": "record_start", "task": "cli"}},
            {"cycle": 10, "command": {"type": "set_input", "channel": 0, "value": 0.9, "normalized": True}},
            {"cycle": cycles, "command": {"type": "record_stop", "success": True}},
        ],
    }
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script))
    result = runner.invoke(
        main,
        ["run", "--profile", "igrisc-11dof", "--scenario", "pick_place",
         "--sim-clock", "--script", str(script_path), "--log-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["cycles"] == cycles
    return Path(report["episodes"][0])


def test_run_reports_and_records(runner, tmp_path):
    episode = record_via_cli(runner, tmp_path)
    assert episode.exists()


def test_run_rejects_bad_config(runner, tmp_path):
    result = runner.invoke(
        main,
        ["run", "--profile", "no-such", "--scenario", "pick_place", "--sim-clock",
         "--cycles", "10", "--log-dir", str(tmp_path)],
    )
    assert result.exit_code != 0
    assert "invalid session config" in result.output


def test_run_ff_overrides_reach_the_episode(runner, tmp_path):
    from dexmouse.episodes import read_header

    script = {
        "duration_cycles": 20,
        "commands": [
            {"cycle": 0, "command": {"type": "record_start", "task": "x"}},
            {"cycle": 20, "command": {"type": "record_stop", "success": True}},
        ],
    }
    (tmp_path / "s.json").write_text(json.dumps(script))
    result = runner.invoke(
        main,
        ["run", "--profile", "igrisc-11dof", "--scenario", "hammering", "--sim-clock",
         "--script", str(tmp_path / "s.json"), "--log-dir", str(tmp_path),
         "--ff", "k_nominal=2.5", "--ff", "v_th=30"],
    )
    assert result.exit_code == 0, result.output
    header = read_header(json.loads(result.output)["episodes"][0])
    assert header["ff_params"]["k_nominal"] == 2.5
    assert header["ff_params"]["v_th"] == 30


def test_run_ff_parse_errors(runner):
    result = runner.invoke(
        main, ["run", "--profile", "a", "--scenario", "b", "--ff", "k_nominal"]
    )
    assert result.exit_code != 0
    assert "KEY=VALUE" in result.output
    result = runner.invoke(
        main, ["run", "--profile", "a", "--scenario", "b", "--ff", "k_nominal=abc"]
    )
    assert result.exit_code != 0
    assert "not a number" in result.output


def test_validate_clean_and_dirty(runner, tmp_path):
    episode = record_via_cli(runner, tmp_path)
    ok = runner.invoke(main, ["validate", str(episode)])
    assert ok.exit_code == 0
    assert "0 violation(s)" in ok.output

    bad = tmp_path / "bad.ndjson"
    bad.write_text('{"t":0,"stream":"camera","payload":[0]}\n')
    dirty = runner.invoke(main, ["validate", str(bad)])
    assert dirty.exit_code == 1
    assert "not an episode header" in dirty.output


def test_replay_clean_and_diverged(runner, tmp_path):
    episode = record_via_cli(runner, tmp_path)
    ok = runner.invoke(main, ["replay", str(episode)])
    assert ok.exit_code == 0
    assert "0 divergences" in ok.output

    lines = episode.read_text().splitlines()
    header = json.loads(lines[0])
    header["ff_params"]["k_nominal"] = 4.0
    lines[0] = json.dumps(header)
    episode.write_text("\n".join(lines) + "\n")
    diverged = runner.invoke(main, ["replay", str(episode)])
    assert diverged.exit_code == 1
    assert "DIVERGED" in diverged.output
    assert "stream=torque" in diverged.output


def test_stats_text_and_csv(runner, tmp_path):
    episode = record_via_cli(runner, tmp_path)
    text = runner.invoke(main, ["stats", str(episode)])
    assert text.exit_code == 0
    assert "success: true" in text.output
    assert "records[joints]: 200" in text.output

    csv_out = runner.invoke(main, ["stats", str(episode), "--csv"])
    head, row = csv_out.output.strip().split("\n")
    assert head.startswith("duration_s,success,")
    assert row.split(",")[1] == "true"


def test_align_writes_grid_csv(runner, tmp_path):
    episode = record_via_cli(runner, tmp_path, cycles=300)
    out = tmp_path / "aligned.csv"
    result = runner.invoke(main, ["align", str(episode), "-o", str(out)])
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("t_ns,q0,")
    assert len(lines) == 1 + 60  # 3 s at 20 Hz


def test_retarget_round_trip(runner):
    source = "t,q0,q1,q2,q3,q4,q5\n7,3100,3100,3100,3100,2900,1024\n"
    result = runner.invoke(
        main, ["retarget", "--profile", "igrisc-11dof"], input=source
    )
    assert result.exit_code == 0, result.output
    head, row = result.output.strip().split("\n")
    assert head.split(",")[:2] == ["t", "index_flex"]
    values = row.split(",")
    assert values[0] == "7"
    assert values[1] == "0.0"  # fully open -> joint minimum


def test_retarget_rejects_bad_input(runner):
    result = runner.invoke(
        main, ["retarget", "--profile", "igrisc-11dof"], input="a,b\n1,2\n"
    )
    assert result.exit_code != 0
    assert "header" in result.output
    result = runner.invoke(
        main,
        ["retarget", "--profile", "igrisc-11dof"],
        input="q0,q1,q2,q3,q4,q5\n1,2,3,4,5,x\n",
    )
    assert result.exit_code != 0
    assert "integers" in result.output


def test_wire_dump_frames_and_accounting(runner):
    result = runner.invoke(main, ["wire", "dump", PING_HEX + " de ad"])
    assert result.exit_code == 0, result.output
    assert "instr=PING" in result.output
    assert "resync" in result.output
    assert "1 frame(s), 1 diagnostic(s)" in result.output


def test_wire_dump_from_file(runner, tmp_path):
    capture = tmp_path / "capture.hex"
    capture.write_text(PING_HEX + "\n")
    result = runner.invoke(main, ["wire", "dump", "--file", str(capture)])
    assert result.exit_code == 0
    assert "instr=PING" in result.output
    assert "0 residue" in result.output


def test_wire_dump_argument_rules(runner):
    neither = runner.invoke(main, ["wire", "dump"])
    assert neither.exit_code != 0
    both = runner.invoke(main, ["wire", "dump", "ff", "--file", "-"], input="ff")
    assert both.exit_code != 0
    bad = runner.invoke(main, ["wire", "dump", "zz"])
    assert bad.exit_code != 0
    assert "not valid hex" in bad.output
