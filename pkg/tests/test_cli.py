import csv

import pytest

from fdxsim.cli import SUBCOMMANDS, main

BASE = """
[array]
tx_shape = 8
rx_shape = 8
af_points = 181

[channel]
seed = 11

[cancellation]
mu_grid = 0, 1, 1e4, 1e6

[output]
figures = {figures}
"""

EXPECTED = {
    "channel": ["h_si.csv"],
    "af": ["af.csv"],
    "bfc-sweep": ["rate_region.csv"],
    "levels": ["levels.csv"],
    "select": ["selection.csv"],
    "codebook-iso": ["isolation.csv"],
}


def _config(tmp_path, text=None, figures="false"):
    path = tmp_path / "scenario.ini"
    path.write_text(text if text is not None else BASE.format(figures=figures))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_subcommand_writes_csv(tmp_path, sub):
    cfg = _config(tmp_path)
    assert main([sub, "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == 0
    for name in EXPECTED[sub]:
        rows = _rows(tmp_path / "o" / name)
        assert len(rows) > 1
        assert all(not c[:1].isdigit() for c in rows[0][1:])


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_rerun_is_byte_identical(tmp_path, sub):
    cfg = _config(tmp_path, figures="true")
    for d in ("a", "b"):
        assert main([sub, "--config", str(cfg), "--out", str(tmp_path / d), "-q"]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert any(f.endswith(".png") for f in files)
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_changes_channel(tmp_path):
    cfg = _config(tmp_path)
    main(["channel", "--config", str(cfg), "--out", str(tmp_path / "a"), "-q"])
    main(["channel", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "12", "-q"])
    assert (tmp_path / "a" / "h_si.csv").read_bytes() != (tmp_path / "b" / "h_si.csv").read_bytes()


def test_env_seed_is_lowest_priority(tmp_path, monkeypatch):
    cfg = _config(tmp_path, "[array]\ntx_shape = 4\nrx_shape = 4\n[output]\nfigures = false\n")
    monkeypatch.setenv("FDXSIM_SEED", "3")
    main(["channel", "--config", str(cfg), "--out", str(tmp_path / "env"), "-q"])
    main(["channel", "--config", str(cfg), "--out", str(tmp_path / "cli"), "--seed", "3", "-q"])
    main(["channel", "--config", str(cfg), "--out", str(tmp_path / "other"), "--seed", "4", "-q"])
    env = (tmp_path / "env" / "h_si.csv").read_bytes()
    assert env == (tmp_path / "cli" / "h_si.csv").read_bytes()
    assert env != (tmp_path / "other" / "h_si.csv").read_bytes()


def test_adding_report_keeps_numbers(tmp_path):
    # select draws extra user channels; the sweep must not notice
    cfg = _config(tmp_path)
    main(["bfc-sweep", "--config", str(cfg), "--out", str(tmp_path / "a"), "-q"])
    main(["select", "--config", str(cfg), "--out", str(tmp_path / "a"), "-q"])
    main(["bfc-sweep", "--config", str(cfg), "--out", str(tmp_path / "b"), "-q"])
    a = (tmp_path / "a" / "rate_region.csv").read_bytes()
    assert a == (tmp_path / "b" / "rate_region.csv").read_bytes()


def test_levels_worked_example(tmp_path):
    cfg = _config(tmp_path, "[budget]\nadc_coupling_db = 70\n[output]\nfigures = false\n")
    assert main(["levels", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 0
    rows = {r[0]: r for r in _rows(tmp_path / "levels.csv")}
    assert float(rows["post_digital_sic"][1]) == -80.0
    assert rows["post_digital_sic"][1] == "-80"


def test_af_two_columns(tmp_path):
    cfg = _config(tmp_path, "[array]\naf_ranges = inf, 24.5\n[output]\nfigures = false\n")
    assert main(["af", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 0
    rows = _rows(tmp_path / "af.csv")
    assert rows[0] == ["angle_rad", "af_rinf", "af_r24.5"]
    assert len(rows) == 722
    mid = rows[361]
    assert float(mid[0]) == 0.0 and float(mid[1]) == pytest.approx(8.0)


def test_seventeen_digits(tmp_path):
    cfg = _config(tmp_path)
    main(["bfc-sweep", "--config", str(cfg), "--out", str(tmp_path), "-q"])
    rows = _rows(tmp_path / "rate_region.csv")
    v = rows[2][2]
    assert float(v) == float(format(float(v), ".17g"))
    assert len(v.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17


def test_config_error_exit_2(tmp_path, capsys):
    cfg = _config(tmp_path, "[channel]\nkappa = -1\n")
    assert main(["channel", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "[channel] line 2" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["channel", "--config", str(tmp_path / "none.ini"), "-q"]) == 2


def test_bad_seed_flag():
    with pytest.raises(SystemExit) as err:
        main(["channel", "--config", "x", "--seed", "-1"])
    assert err.value.code == 2


def test_pipeline_error_exit_3(tmp_path, capsys):
    # a full-rank zero-forcing request leaves no transmit null space
    cfg = _config(tmp_path, "[array]\ntx_shape = 4\nrx_shape = 4\n"
                  "[cancellation]\nstrategy = zero_forcing\nrank = 4\n[output]\nfigures = false\n")
    assert main(["levels", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    assert "module cancellation" in capsys.readouterr().err


def test_collision_exit_3(tmp_path, capsys):
    cfg = _config(tmp_path, "[array]\ntx_shape = 2\nrx_shape = 2\nrx_offset = 0, 0, 0\n"
                  "[output]\nfigures = false\n")
    assert main(["channel", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    assert "module array-geometry" in capsys.readouterr().err
