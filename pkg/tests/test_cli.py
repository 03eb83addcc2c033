import pytest

from aeimpute.cli import KEYS, main, parse_config_text
from aeimpute.exceptions import ConfigError

SMALL = ["--set", "data.n_records=600", "--set", "train.max_cycles=150"]
OUTPUTS = ("data.csv", "missing.csv", "truth.csv", "model.txt", "train_report.csv", "forest.txt",
           "imputed_ann-ga.csv", "results_ann-ga.csv", "imputed_ann-ga-df.csv", "results_ann-ga-df.csv",
           "table4.csv", "table5.csv", "table6.csv", "fig5.csv", "fig6.csv", "report.txt")


def run_all(out, extra=()):
    args = ["--out-dir", str(out), *SMALL, *extra]
    codes = [
        main(["synth", *args]),
        main(["train", *args]),
        main(["forest", *args]),
        main(["impute", *args, "--mode", "ann-ga"]),
        main(["impute", *args, "--mode", "ann-ga-df", "--forest", "forest.txt"]),
        main(["evaluate", *args]),
    ]
    return codes


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run_all(out) == [0] * 6
    return out


def test_all_outputs_written(workdir):
    for name in OUTPUTS:
        assert (workdir / name).is_file(), name


def test_model_header(workdir):
    lines = (workdir / "model.txt").read_text().splitlines()
    assert lines[1] == "10 9 10"


def test_train_report_bounded(workdir):
    lines = (workdir / "train_report.csv").read_text().splitlines()
    assert lines[0] == "cycle,train_mse,validation_mse"
    assert 1 <= len(lines) - 1 <= 150


def test_forest_has_four_trees(workdir):
    text = (workdir / "forest.txt").read_text()
    assert "trees 4" in text.splitlines()[1]
    assert sum(line.startswith("tree ") for line in text.splitlines()) == 4


def test_imputed_outputs_complete(workdir):
    truth = (workdir / "truth.csv").read_text().splitlines()
    assert len(truth) - 1 == 120
    for mode in ("ann-ga", "ann-ga-df"):
        assert "nan" not in (workdir / f"imputed_{mode}.csv").read_text()
        assert len((workdir / f"results_{mode}.csv").read_text().splitlines()) == 121


def test_report_printed(workdir, capsys):
    assert main(["evaluate", "--out-dir", str(workdir)]) == 0
    out = capsys.readouterr().out
    assert out == (workdir / "report.txt").read_text()
    assert "ann-ga-df" in out


def test_byte_identical_rerun(workdir, tmp_path):
    assert run_all(tmp_path) == [0] * 6
    for name in OUTPUTS:
        assert (tmp_path / name).read_bytes() == (workdir / name).read_bytes(), name


def test_zero_missing_fraction(tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path), "--set", "data.n_records=50",
                 "--set", "data.missing_fraction=0"]) == 0
    assert (tmp_path / "missing.csv").read_bytes() == (tmp_path / "data.csv").read_bytes()
    assert (tmp_path / "truth.csv").read_text().strip() == "record_index,variable,true_value"


def test_single_tree(workdir, tmp_path):
    for name in ("missing.csv",):
        (tmp_path / name).write_bytes((workdir / name).read_bytes())
    assert main(["forest", "--out-dir", str(tmp_path), "--set", "forest.n_trees=1"]) == 0
    assert "trees 1" in (tmp_path / "forest.txt").read_text()


def test_df_without_forest_is_usage_error(workdir, capsys):
    assert main(["impute", "--out-dir", str(workdir), "--mode", "ann-ga-df"]) == 1
    assert "forest" in capsys.readouterr().err


def test_unknown_key_is_usage_error(tmp_path, capsys):
    assert main(["synth", "--out-dir", str(tmp_path), "--set", "data.bogus=1"]) == 1
    cfg = tmp_path / "run.cfg"
    cfg.write_text("ga.populaton = 20\n")
    assert main(["synth", "--out-dir", str(tmp_path), "--config", str(cfg)]) == 1


def test_bad_subcommand_exit_1(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 1


def test_missing_truth_is_data_error(tmp_path, capsys):
    assert main(["evaluate", "--out-dir", str(tmp_path)]) == 2
    assert "truth.csv" in capsys.readouterr().err


def test_missing_model_is_data_error(workdir, tmp_path):
    (tmp_path / "missing.csv").write_bytes((workdir / "missing.csv").read_bytes())
    assert main(["impute", "--out-dir", str(tmp_path)]) == 2


def test_help_lists_keys(capsys):
    with pytest.raises(SystemExit) as e:
        main(["train", "--help"])
    assert e.value.code == 0
    text = capsys.readouterr().out
    for key in KEYS:
        assert key in text


def test_seed_override_changes_data(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--out-dir", str(a), "--set", "data.n_records=40"]) == 0
    assert main(["synth", "--out-dir", str(b), "--set", "data.n_records=40", "--seed-override", "7"]) == 0
    assert (a / "data.csv").read_bytes() != (b / "data.csv").read_bytes()


def test_set_beats_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ndata.n_records = 30\n")
    assert main(["synth", "--out-dir", str(tmp_path), "--config", str(cfg),
                 "--set", "data.n_records=20"]) == 0
    assert len((tmp_path / "data.csv").read_text().splitlines()) == 21


def test_parse_config_text():
    assert parse_config_text("ga.population = 20\n\n# x\nforest.prune = yes\n") == {
        "ga.population": 20, "forest.prune": True}
    with pytest.raises(ConfigError):
        parse_config_text("ga.population 20")
    with pytest.raises(ConfigError):
        parse_config_text("ga.population = many")
