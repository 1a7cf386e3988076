"""Config parsing, serialization, and validation."""

import pytest

from meritopt.config import (
    CampaignConfig,
    parse_text,
    read_file,
    to_text,
    with_overrides,
    write_file,
)
from meritopt.errors import ConfigError
from meritopt.genetic import GAConfig
from meritopt.hyper_tuner import TuningBudget


def test_empty_text_gives_defaults():
    cfg = parse_text("")
    assert cfg == CampaignConfig()
    assert cfg.mode == "automlga"
    assert cfg.initial_samples == 150
    assert cfg.batch_reps == 5
    assert cfg.max_batches == 20
    assert cfg.epsilon_threshold == 1e-3
    assert cfg.cv_folds == 10


def test_round_trip_preserves_every_setting():
    cfg = CampaignConfig(
        mode="mlga",
        seed=42,
        initial_samples=60,
        batch_reps=3,
        max_batches=7,
        epsilon_threshold=5e-4,
        improvement_delta=1e-5,
        convergence_window=3,
        cv_folds=5,
        evaluator_command="run {request} {response}",
        evaluator_timeout=120.0,
        tuning=TuningBudget(n_initial=4, n_total=9),
        ga=GAConfig(population=30, generations=12, mutation_rate=0.7),
    )
    text = to_text(cfg)
    assert parse_text(text) == cfg
    assert to_text(parse_text(text)) == text


def test_round_trip_through_file(tmp_path):
    path = str(tmp_path / "settings")
    cfg = CampaignConfig(seed=5, initial_samples=80, cv_folds=4)
    write_file(cfg, path)
    assert read_file(path) == cfg


def test_comments_and_blank_lines_ignored():
    cfg = parse_text("# a comment\n\nseed = 9  # trailing comment\nmode = mlga\n")
    assert cfg.seed == 9
    assert cfg.mode == "mlga"


def test_nested_overrides():
    cfg = parse_text(
        "ga.population = 50\n"
        "ga.crossover_rate = 0.8\n"
        "tuning.n_total = 12\n"
        "merit.nox_limit = 2.0\n"
        "bound.SOI.lower = -20.0\n"
        "bound.SOI.upper = 0.0\n"
    )
    assert cfg.ga.population == 50
    assert cfg.ga.crossover_rate == 0.8
    assert cfg.tuning.n_total == 12
    assert cfg.constants.nox_limit == 2.0
    soi = next(v for v in cfg.space.variables if v.name == "SOI")
    assert (soi.lower, soi.upper) == (-20.0, 0.0)


def test_with_overrides_replaces_fields():
    cfg = with_overrides(CampaignConfig(), seed=7, mode="mlga")
    assert cfg.seed == 7
    assert cfg.mode == "mlga"
    assert cfg.initial_samples == CampaignConfig().initial_samples


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("seed 9", "expected 'key = value'"),
        ("= 9", "empty key"),
        ("seed = 1\nseed = 2", "duplicate key"),
        ("no_such_key = 1", "unknown config keys"),
        ("cv_folds = 2.5", "expected an integer"),
        ("bound.SOI.lower = -20.0", "need both lower and upper"),
        ("mode = other", "mode must be one of"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_text(text)


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        (dict(initial_samples=5, cv_folds=10), "initial_samples"),
        (dict(batch_reps=0), "batch_reps"),
        (dict(max_batches=0), "max_batches"),
        (dict(epsilon_threshold=0.0), "epsilon_threshold"),
        (dict(improvement_delta=-1.0), "improvement_delta"),
        (dict(convergence_window=0), "convergence_window"),
        (dict(cv_folds=1), "cv_folds"),
        (dict(evaluator_timeout=0.0), "evaluator_timeout"),
    ],
)
def test_field_validation(kwargs, fragment):
    with pytest.raises(ConfigError, match=fragment):
        CampaignConfig(**kwargs)


def test_read_file_missing_path(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        read_file(str(tmp_path / "absent"))
