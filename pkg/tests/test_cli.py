import json
from pathlib import Path

import pytest

from feedersim.cli import cli_main

SAMPLE_DIR = Path(__file__).resolve().parent.parent / "sample_data"


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"n_intervals": 96, "n_houses": 3, "seed": 11}))
    return path


def test_compare_smoke(tmp_path, tiny_config, capsys):
    code = cli_main(["compare", "--config", str(tiny_config),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--prices", str(SAMPLE_DIR / "prices_2017.csv"),
                     "--out", str(tmp_path / "out")])
    assert code == 0
    assert (tmp_path / "out" / "summary.csv").exists()
    out = capsys.readouterr().out
    assert "baseline" in out and "alpha=0.0" in out


def test_generate_then_run(tmp_path, tiny_config):
    scenario = tmp_path / "scenario.json"
    assert cli_main(["generate", "--config", str(tiny_config),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--seed", "3", "--out", str(scenario)]) == 0
    assert scenario.exists()
    code = cli_main(["run", "--scenario", str(scenario),
                     "--prices", str(SAMPLE_DIR / "prices_2017.csv"),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--alpha", "0.5", "--out", str(tmp_path / "run")])
    assert code == 0
    assert (tmp_path / "run" / "alpha_0.5" / "substation.csv").exists()


def test_run_baseline_alpha_literal(tmp_path, tiny_config):
    scenario = tmp_path / "scenario.json"
    cli_main(["generate", "--config", str(tiny_config),
              "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
              "--out", str(scenario)])
    code = cli_main(["run", "--scenario", str(scenario),
                     "--prices", str(SAMPLE_DIR / "prices_2017.csv"),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--alpha", "baseline", "--out", str(tmp_path / "run")])
    assert code == 0
    assert (tmp_path / "run" / "baseline" / "categories.csv").exists()


def test_missing_price_file_exits_2(tmp_path, tiny_config, capsys):
    code = cli_main(["compare", "--config", str(tiny_config),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--prices", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "out")])
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err
    assert not (tmp_path / "out" / "summary.csv").exists()


def test_alpha_out_of_range_exits_1(tmp_path, tiny_config, capsys):
    code = cli_main(["run", "--scenario", str(tmp_path / "s.json"),
                     "--prices", str(SAMPLE_DIR / "prices_2017.csv"),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--alpha", "1.5", "--out", str(tmp_path / "run")])
    assert code == 1
    assert "alpha" in capsys.readouterr().err


def test_unknown_flag_exits_1(capsys):
    assert cli_main(["compare", "--confg", "x"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_missing_subcommand_exits_1():
    assert cli_main([]) == 1


def test_help_exits_0(capsys):
    assert cli_main(["--help"]) == 0
    assert "feedersim" in capsys.readouterr().out
    assert cli_main(["run", "--help"]) == 0


def test_bad_config_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n_hoses": 3}')
    code = cli_main(["compare", "--config", str(bad),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--prices", str(SAMPLE_DIR / "prices_2017.csv"),
                     "--out", str(tmp_path / "out")])
    assert code == 2


def test_window_flag(tmp_path, tiny_config):
    code = cli_main(["compare", "--config", str(tiny_config),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--prices", str(SAMPLE_DIR / "prices_2017.csv"),
                     "--out", str(tmp_path / "out"),
                     "--window", "2017-01-01T06:00:00Z,2017-01-01T12:00:00Z"])
    assert code == 0
    lines = (tmp_path / "out" / "baseline" / "substation.csv").read_text().splitlines()
    assert len(lines) == 1 + 25  # inclusive window end
    assert lines[1].startswith("2017-01-01T06:00:00Z")


def test_bad_window_exits_1(tmp_path, tiny_config, capsys):
    code = cli_main(["compare", "--config", str(tiny_config),
                     "--weather", str(SAMPLE_DIR / "weather_2017.csv"),
                     "--prices", str(SAMPLE_DIR / "prices_2017.csv"),
                     "--out", str(tmp_path / "out"), "--window", "oops"])
    assert code == 1
