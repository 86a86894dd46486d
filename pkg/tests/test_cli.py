import json

import pytest

from bimanual_cmp.harness import cli
from bimanual_cmp.harness.logs import metrics_from_log, read_csv

from conftest import short_scenario_text


def test_validate_passes(capsys):
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "[FAIL]" not in out and out.rstrip().endswith("all checks passed")


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nduration = 5\n")
    assert cli.main(["validate", "--config", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err
    assert cli.main(["validate", "--config", str(tmp_path / "missing.ini")]) == 2


def test_bad_seed_and_variant_exit_2(tmp_path):
    assert cli.main(["validate", "--seed", "-1"]) == 2
    assert cli.main(["validate", "--variant", "Everything"]) == 2


def test_flags_before_or_after_command():
    a = cli.build_parser().parse_args(["--seed", "3", "replay", "--variant", "RecOnly"])
    b = cli.build_parser().parse_args(["replay", "--seed", "3", "--variant", "RecOnly"])
    assert cli._options(a) == cli._options(b)
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["dance"])


@pytest.fixture(scope="module")
def short_ini(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "short.ini"
    path.write_text(short_scenario_text())
    return path


def test_demonstrate_writes_joint_csv(tmp_path, short_ini):
    assert cli.main(["demonstrate", "--config", str(short_ini), "--out", str(tmp_path)]) == 0
    cols, data = read_csv(tmp_path / "demonstration.csv")
    assert cols[0] == "t" and data.shape == (2501, 15)


def test_replay_learns_then_reuses_cmps(tmp_path, short_ini, capsys):
    args = ["replay", "--config", str(short_ini), "--out", str(tmp_path), "--variant", "RecOnly", "--no-plots"]
    assert cli.main(args) == 0
    assert "learning first" in capsys.readouterr().out
    assert (tmp_path / "cmp_robot1.json").exists() and not list(tmp_path.glob("*.svg"))
    first = (tmp_path / "replay_RecOnly.csv").read_bytes()
    assert cli.main(args) == 0
    assert "using CMPs" in capsys.readouterr().out
    assert (tmp_path / "replay_RecOnly.csv").read_bytes() == first
    cols, data = read_csv(tmp_path / "replay_RecOnly.csv")
    stored = json.loads((tmp_path / "replay_RecOnly_metrics.json").read_text())
    assert metrics_from_log(cols, data).as_dict() == stored


def test_replay_writes_plots(tmp_path, short_ini):
    assert cli.main(["replay", "--config", str(short_ini), "--out", str(tmp_path), "--variant", "Entire"]) == 0
    svgs = list(tmp_path.glob("*.svg"))
    assert svgs and all(p.read_text().startswith("<svg") or "<svg" in p.read_text()[:200] for p in svgs)
