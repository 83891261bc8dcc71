import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from gxestat.cli import main
from gxestat.fixtures import fixture_path

OATS = str(fixture_path("oats.csv"))


@pytest.fixture()
def runner():
    return CliRunner()


def test_significance_stdout(runner):
    result = runner.invoke(main, ["significance", "--input", OATS, "--case", "2"])
    assert result.exit_code == 0
    assert "LC * CLT" in result.output
    assert "residual" in result.output


def test_stability_stdout(runner):
    result = runner.invoke(main, ["stability", "--input", OATS])
    assert result.exit_code == 0
    assert "G01" in result.output and "YS" in result.output


def test_unknown_flag_usage_error(runner):
    result = runner.invoke(main, ["significance", "--nope", "x"])
    assert result.exit_code == 1


def test_missing_input_usage_error(runner):
    result = runner.invoke(main, ["significance", "--input", "/does/not/exist.csv"])
    assert result.exit_code == 1


def test_data_error_exit_code(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("LC,RP,CLT,MY\nB1,1,A,notanumber\n")
    result = runner.invoke(main, ["stability", "--input", str(bad)])
    assert result.exit_code == 2
    assert "row" in result.output or "row" in (result.stderr or "")


def test_help_available_for_each_subcommand(runner):
    for cmd in ("significance", "stability", "ammi", "gge", "all", "serve"):
        result = runner.invoke(main, [cmd, "--help"])
        assert result.exit_code == 0
        assert "--help" in result.output or "Usage" in result.output


def test_gge_mode_option(runner, tmp_path):
    out = tmp_path / "g"
    result = runner.invoke(
        main,
        ["gge", "--input", OATS, "--mode", "which_won_where", "--out", str(out)],
    )
    assert result.exit_code == 0
    assert (out / "gge_which_won_where.svg").exists()
    payload = json.loads((out / "gge.json").read_text())
    assert list(payload["modes"]) == ["which_won_where"]


def test_ammi_outputs(runner, tmp_path):
    out = tmp_path / "a"
    result = runner.invoke(
        main,
        ["ammi", "--input", OATS, "--n-components", "2", "--seed", "3", "--out", str(out)],
    )
    assert result.exit_code == 0
    assert (out / "ammi.json").exists() and (out / "ammi_biplot.svg").exists()


def test_all_writes_expected_tree_and_fails_clean(runner, tmp_path):
    out = tmp_path / "results"
    result = runner.invoke(
        main,
        ["all", "--input", OATS, "--case", "2", "--seed", "11", "--n-boot", "200", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    names = sorted(p.name for p in out.iterdir())
    assert "bundle.json" in names
    assert "stability.csv" in names
    assert sum(n.startswith("gge_") for n in names) == 7

    # failure on bad input removes the partial tree
    bad = tmp_path / "bad.csv"
    bad.write_text("LC,RP,CLT,MY\nB1,1,A,1.0\nB1,1,A,2.0\n")
    out2 = tmp_path / "results2"
    result2 = runner.invoke(main, ["all", "--input", str(bad), "--out", str(out2)])
    assert result2.exit_code == 2
    assert not out2.exists()


def test_seed_env_fallback(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("GXESTAT_SEED", "77")
    out = tmp_path / "a"
    result = runner.invoke(main, ["ammi", "--input", OATS, "--n-boot", "100", "--out", str(out)])
    assert result.exit_code == 0
    payload = json.loads((out / "ammi.json").read_text())
    assert payload["selection"] is not None
