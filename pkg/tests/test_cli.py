import json
from pathlib import Path

import numpy as np
import pytest

from cfspm import cli
from cfspm.signal import load_cohort
from cfspm.trainer import TrainConfig


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("CFSPM_SEED", raising=False)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("clidata")
    spec = root / "spec.json"
    spec.write_text(json.dumps(
        {"subjects": 3, "trials_per_subject": 8, "seed": 11}))
    out = root / "data"
    assert cli.main(["synth", "--spec", str(spec), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def fast_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("clicfg") / "fast.json"
    path.write_text(json.dumps({
        "model": {"embed_dim": 8, "temporal_filters": 2, "depth": 1,
                  "n_state": 4},
        "train": {"stage1_epochs": 1, "epochs": 2, "batch_size": 8},
    }))
    return path


def read_train_echo(run_dir: Path) -> TrainConfig:
    echo = json.loads((run_dir / "run_config.json").read_text())
    return TrainConfig.from_json(echo["train"])


def test_synth_writes_loadable_cohort(data_dir):
    cohort = load_cohort(data_dir)
    assert [s.subject_id for s in cohort.subjects] == ["s01", "s02", "s03"]
    assert cohort.subjects[0].trials.shape == (8, 6, 1000)


def test_synth_rejects_bad_spec(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"subjects": 2, "flavor": "mint"}))
    code = cli.main(["synth", "--spec", str(bad), "--out",
                     str(tmp_path / "d")])
    assert code == 1
    assert "flavor" in capsys.readouterr().err


def test_synth_missing_spec_file(tmp_path, capsys):
    code = cli.main(["synth", "--spec", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "d")])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_train_writes_run_dir(data_dir, fast_cfg, tmp_path):
    out = tmp_path / "run"
    code = cli.main(["train", "--data", str(data_dir), "--target", "s02",
                     "--config", str(fast_cfg), "--out", str(out)])
    assert code == 0
    assert (out / "summary.csv").exists()
    assert (out / "fold_s02" / "metrics.json").exists()
    assert (out / "fold_s02" / "audit.jsonl").exists()
    assert (out / "fold_s02" / "checkpoint" / "manifest.json").exists()
    rows = (out / "summary.csv").read_text().strip().splitlines()
    assert rows[0].startswith("subject,accuracy")
    assert rows[1].startswith("s02,")


def test_flag_beats_config_beats_profile(data_dir, fast_cfg, tmp_path):
    out = tmp_path / "run"
    code = cli.main(["train", "--data", str(data_dir), "--target", "s01",
                     "--config", str(fast_cfg), "--out", str(out),
                     "--epochs", "1", "--stage1-epochs", "0",
                     "--alpha", "0.5"])
    assert code == 0
    tcfg = read_train_echo(out)
    assert tcfg.epochs == 1          # flag wins over config file (2)
    assert tcfg.batch_size == 8      # config file wins over profile (16)
    assert tcfg.alpha == 0.5         # flag wins over profile (0.85)
    assert tcfg.weight_decay == 1e-3  # profile default survives


def test_env_seed_overrides_flag(data_dir, fast_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("CFSPM_SEED", "99")
    out = tmp_path / "run"
    code = cli.main(["train", "--data", str(data_dir), "--target", "s01",
                     "--config", str(fast_cfg), "--out", str(out),
                     "--seed", "3"])
    assert code == 0
    assert read_train_echo(out).seed == 99


def test_env_seed_must_be_integer(data_dir, monkeypatch, capsys):
    monkeypatch.setenv("CFSPM_SEED", "pi")
    code = cli.main(["loso", "--data", str(data_dir), "--out", "x"])
    assert code == 1
    assert "CFSPM_SEED" in capsys.readouterr().err


def test_ablation_flags_reach_config(data_dir, fast_cfg, tmp_path):
    out = tmp_path / "run"
    code = cli.main(["train", "--data", str(data_dir), "--target", "s01",
                     "--config", str(fast_cfg), "--out", str(out),
                     "--no-sppm", "--no-dynamic-refresh", "--no-context"])
    assert code == 0
    tcfg = read_train_echo(out)
    assert tcfg.no_sppm and tcfg.no_dynamic_refresh and tcfg.no_context


def test_loso_and_report(data_dir, fast_cfg, tmp_path, capsys):
    run_a = tmp_path / "a"
    run_b = tmp_path / "b"
    assert cli.main(["loso", "--data", str(data_dir), "--config",
                     str(fast_cfg), "--out", str(run_a)]) == 0
    assert cli.main(["loso", "--data", str(data_dir), "--config",
                     str(fast_cfg), "--out", str(run_b),
                     "--no-sppm"]) == 0
    capsys.readouterr()
    assert cli.main(["report", "--runs", str(run_a), str(run_b)]) == 0
    text = capsys.readouterr().out
    assert str(run_a) in text and str(run_b) in text
    assert "accuracy" in text
    # 3 paired subjects can never reach the 5 non-zero differences needed
    assert "wilcoxon accuracy" in text


def test_report_reads_back_summary_values(data_dir, fast_cfg, tmp_path):
    run = tmp_path / "a"
    assert cli.main(["loso", "--data", str(data_dir), "--config",
                     str(fast_cfg), "--out", str(run)]) == 0
    table = cli._read_run_metrics(run)
    assert sorted(table) == ["s01", "s02", "s03"]
    metrics = json.loads((run / "fold_s01" / "metrics.json").read_text())
    assert table["s01"]["accuracy"] == metrics["metrics"]["accuracy"]


def test_missing_data_dir_is_validation_error(capsys):
    assert cli.main(["train", "--data", "/no/such/dir", "--target", "s01",
                     "--out", "x"]) == 1
    assert "data directory" in capsys.readouterr().err


def test_unknown_target_is_validation_error(data_dir, capsys):
    assert cli.main(["train", "--data", str(data_dir), "--target", "s09",
                     "--out", "x"]) == 1
    assert "s09" in capsys.readouterr().err


def test_invalid_config_field_named_in_error(data_dir, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {"turbo": True}}))
    assert cli.main(["loso", "--data", str(data_dir), "--config", str(cfg),
                     "--out", "x"]) == 1
    assert "turbo" in capsys.readouterr().err


def test_invalid_config_value_rejected_before_compute(data_dir, tmp_path,
                                                      capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {"alpha": 2.0}}))
    assert cli.main(["loso", "--data", str(data_dir), "--config", str(cfg),
                     "--out", "x"]) == 1
    assert "alpha" in capsys.readouterr().err


def test_malformed_config_json(data_dir, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert cli.main(["loso", "--data", str(data_dir), "--config", str(cfg),
                     "--out", "x"]) == 1
    assert "JSON" in capsys.readouterr().err


def test_bad_profile_flag_exits_one(data_dir, capsys):
    code = cli.main(["loso", "--data", str(data_dir), "--out", "x",
                     "--profile", "bogus"])
    assert code == 1


def test_profiles_expose_published_settings():
    from cfspm.profiles import get_profile
    xw = get_profile("xw")
    assert (xw.embed_dim, xw.depth, xw.temporal_filters) == (30, 2, 8)
    assert (xw.train.alpha, xw.train.tau_p) == (0.98, 0.60)
    assert (xw.r_spec, xw.tau_f, xw.train.stage1_epochs) == (0.45, 0.01, 25)
    s2019 = get_profile("s2019")
    assert (s2019.embed_dim, s2019.train.alpha) == (38, 0.95)
    assert (s2019.r_spec, s2019.train.stage1_epochs) == (0.50, 10)
    assert s2019.train.epochs <= 200
    with pytest.raises(ValueError, match="profile"):
        get_profile("nope")


def test_profile_binds_to_cohort_geometry():
    from cfspm.profiles import get_profile
    cfg = get_profile("synth").model_config(channels=6, samples=1000)
    assert cfg.tokenizer.channels == 6
    assert cfg.tokenizer.samples == 1000
    assert cfg.token_len == 66


def test_gradcheck_suite_geometry():
    # keep the CLI audit honest about its advertised tiny geometry
    import inspect
    src = inspect.getsource(cli.gradient_suite)
    assert "channels=4" in src and "samples=120" in src
    assert "depth=1" in src and "n_state=4" in src
    sig = inspect.signature(cli.gradient_suite)
    assert sig.parameters["eps"].default == 1e-5
