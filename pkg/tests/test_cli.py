"""CLI subcommand tests (driven through main(argv))."""

import io
import sys

import pytest

from ambimaze.cli import main
from ambimaze.mapformat import default_spec, serialize
from ambimaze.percept import frame_to_ppm


@pytest.fixture()
def default_map_file(tmp_path):
    path = tmp_path / "default.map"
    path.write_text(serialize(default_spec()))
    return str(path)


def test_map_check_ok(capsys, default_map_file):
    assert main(["map", "check", default_map_file]) == 0
    assert "ok:" in capsys.readouterr().out


def test_map_check_diagnostics(tmp_path, capsys):
    bad = tmp_path / "bad.map"
    bad.write_text("####\n#SX#\n####\n")
    assert main(["map", "check", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "unknown cell code" in err


def test_map_check_missing_file(capsys):
    assert main(["map", "check", "/nonexistent/nowhere.map"]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["oracle", "--bogus"])
    assert exc.value.code == 2


def test_oracle_default_map(capsys):
    assert main(["oracle", "--map", "default"]) == 0
    out = capsys.readouterr().out
    assert "LEFT" in out and "RIGHT" in out and "success True" in out
    for line in out.strip().splitlines():
        length = int(line.split("plan length ")[1].split(",")[0])
        assert 45 <= length <= 55


def test_render_writes_ppm_frames(tmp_path, capsys):
    out = tmp_path / "frames"
    assert main([
        "render", "--map", "default", "--actions", "1,2,1", "--out", str(out), "--seed", "3",
    ]) == 0
    files = sorted(out.glob("*.ppm"))
    assert len(files) == 4
    data = files[0].read_bytes()
    assert data.startswith(b"P6\n")
    # Re-render is byte-identical.
    out2 = tmp_path / "frames2"
    main(["render", "--map", "default", "--actions", "1,2,1", "--out", str(out2), "--seed", "3"])
    for a, b in zip(files, sorted(out2.glob("*.ppm"))):
        assert a.read_bytes() == b.read_bytes()


def test_render_rejects_bad_actions(tmp_path, capsys):
    assert main(["render", "--actions", "1,9", "--out", str(tmp_path)]) == 2
    assert "actions" in capsys.readouterr().err


def test_baseline_random_prints_rate(capsys):
    assert main([
        "baseline-random", "--map", "default", "--episodes", "200",
        "--max-moves", "100", "--seed", "1",
    ]) == 0
    out = capsys.readouterr().out
    assert "success rate:" in out
    rate = float(out.split("success rate:")[1].split()[0])
    assert 0.0 <= rate <= 1.0


def test_run_subcommand(tmp_path, capsys):
    config = tmp_path / "exp.cfg"
    config.write_text(
        f"agent = random\nepisodes = 20\nseeds = 1\nout = {tmp_path / 'runs'}\nname = cli\n"
    )
    assert main(["run", "--config", str(config)]) == 0
    out = capsys.readouterr().out
    assert "final rolling average" in out
    assert (tmp_path / "runs" / "cli" / "aggregate.csv").exists()


def test_run_bad_config(tmp_path, capsys):
    config = tmp_path / "exp.cfg"
    config.write_text("agent = random\nepisodes = 5\nwhat = 1\n")
    assert main(["run", "--config", str(config)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_play_scripted_session(monkeypatch, capsys):
    feed = io.StringIO("w\na\nq\n")
    monkeypatch.setattr(sys, "stdin", feed)
    monkeypatch.setattr("builtins.input", lambda prompt="": feed.readline().strip())
    assert main(["play", "--map", "default", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "@" in out  # agent glyph in the ASCII view
    assert "keys:" in out
