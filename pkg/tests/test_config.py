from pathlib import Path

import pytest
import yaml

from chanfuse.errors import ConfigError
from chanfuse.pipeline.config import (
    BENCHMARK,
    RunConfig,
    TrainConfig,
    benchmark_config,
    from_mapping,
    load_config,
    parse_override,
)


def test_defaults_follow_the_method():
    cfg = RunConfig()
    assert (cfg.window_s, cfg.stride_s, cfg.memory_length, cfg.learning_rate) == (7.5, 1.0, 14, 5.5e-4)
    assert cfg.patch_length == 3840
    tc = cfg.train_config()
    assert 25 <= tc.pretrain_min_epochs <= tc.pretrain_max_epochs <= 50
    assert tc.finetune_epochs <= 10


def test_unknown_key_is_an_error():
    with pytest.raises(ConfigError, match="unknown config keys: colour"):
        from_mapping({"colour": "red"})


@pytest.mark.parametrize(
    "raw",
    [
        {"dim": "128"},
        {"dim": 1.5},
        {"learning_rate": "fast"},
        {"freeze_all_but_fusion": 1},
        {"enc_widths": [1, "a"]},
        {"fusion": "concat"},
        {"context_policy": "medium"},
        {"input_scaling": "zscore"},
        {"finetune_scheme": "kfold"},
        {"finetune_epochs": 11, "finetune_max_epochs": 11},
        {"finetune_epochs": 6},
        {"pretrain_min_epochs": 60},
        {"band_high_hz": 300.0},
        {"band_low_hz": 0.0},
        {"memory_length": 20},
    ],
)
def test_invalid_values(raw):
    with pytest.raises(ConfigError):
        from_mapping(raw)


def test_integers_widen_to_floats():
    assert from_mapping({"learning_rate": 1}).learning_rate == 1.0


def test_yaml_round_trip(tmp_path):
    cfg = benchmark_config(seed=3, test_subjects=["a", "b"])
    path = tmp_path / "c.yaml"
    path.write_text(cfg.to_yaml())
    assert load_config(path) == cfg
    assert yaml.safe_load(cfg.to_yaml())["enc_widths"] == [4, 8, 16, 32]


def test_overrides_and_precedence(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 1\ndim: 64\n")
    cfg = load_config(path, ["dim=32", "tcn_dilations=[1, 2, 4, 8]"], seed=9)
    assert (cfg.seed, cfg.dim, cfg.tcn_dilations) == (9, 32, (1, 2, 4, 8))


@pytest.mark.parametrize("text", ["novalue", "=3", "k=[1,"])
def test_bad_override(text):
    with pytest.raises(ConfigError):
        parse_override(text)


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.yaml")
    (tmp_path / "bad.yaml").write_text("a: [\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")
    (tmp_path / "empty.yaml").write_text("")
    assert load_config(tmp_path / "empty.yaml") == RunConfig()


def test_replace_revalidates():
    cfg = RunConfig()
    assert cfg.replace(head="mlp").head == "mlp"
    with pytest.raises(ConfigError):
        cfg.replace(head="rnn")


def test_sub_configs():
    cfg = benchmark_config()
    assert cfg.model_config().encoder.patch_length == int(7.5 * BENCHMARK["target_rate_hz"])
    assert cfg.preprocess_config().band_high_hz == BENCHMARK["band_high_hz"]
    assert isinstance(cfg.train_config(), TrainConfig)
    assert cfg.train_config().batches_per_epoch == BENCHMARK["batches_per_epoch"]
    assert cfg.context_s == 180.0
    assert cfg.replace(context_policy="long").context_s == 3600.0


def test_shipped_benchmark_file_matches_preset():
    path = Path(__file__).resolve().parents[1] / "configs" / "benchmark.yaml"
    assert load_config(path) == benchmark_config()
