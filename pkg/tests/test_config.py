from importlib import resources

import pytest

from scene_text_synthesis.config import Config
from scene_text_synthesis.exceptions import ConfigError


def test_instances_do_not_share_sections():
    a, b = Config(), Config()
    a.synthesis.count = 99
    a.paths.corpus_paths.append("x.txt")
    assert b.synthesis.count == Config.synthesis.count
    assert b.paths.corpus_paths == []


def test_update_nested_and_flat():
    config = Config()
    config.update({"synthesis": {"count": 7}, "k_nearest": 3})
    assert config.synthesis.count == 7
    assert config.appearance.k_nearest == 3


@pytest.mark.parametrize(
    "values", [{"no_such_key": 1}, {"synthesis": {"no_such_key": 1}}]
)
def test_update_rejects_unknown_keys(values):
    with pytest.raises(ConfigError):
        Config().update(values)


def test_hash_is_stable_and_value_sensitive():
    a, b = Config(), Config()
    assert a.hash() == b.hash()
    b.general.random_seed = 7
    assert a.hash() != b.hash()


def test_ini_round_trip(tmp_path):
    config = Config()
    config.update(
        {
            "paths": {"corpus_paths": ["a.txt", "b.txt"], "output_dir": "run"},
            "placement": {"max_height": 48},
        }
    )
    config.to_ini(tmp_path / "config.ini")
    loaded = Config.from_file(tmp_path / "config.ini")
    assert loaded.to_dict() == config.to_dict()
    assert loaded.hash() == config.hash()


def test_json_round_trip(tmp_path):
    config = Config()
    config.update({"paths": {"corpus_languages": {"zh.txt": "zh"}}, "count": 4})
    config.to_json(tmp_path / "config.json")
    assert Config.from_file(tmp_path / "config.json").to_dict() == config.to_dict()


def test_malformed_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        Config.from_file(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        Config.from_file(tmp_path / "missing.json")


def test_packaged_template_loads():
    ref = resources.files("scene_text_synthesis") / "config.ini"
    with resources.as_file(ref) as path:
        config = Config.from_ini(path)
    config.validate(check_paths=False)
    assert set(config.sections) == set(Config().sections)


@pytest.mark.parametrize(
    "values",
    [
        {"max_instances_per_image": 0},
        {"count": -1},
        {"granularity": "paragraph"},
        {"corpus_mix_ratio": 1.5},
        {"coverage_min": 0.0},
    ],
)
def test_validate_rejects_bad_values(values):
    config = Config()
    config.update(values)
    with pytest.raises(ConfigError):
        config.validate(check_paths=False)


def test_validate_requires_paths(tmp_path):
    config = Config()
    with pytest.raises(ConfigError, match="backgrounds_dir"):
        config.validate()

    config.update({"backgrounds_dir": tmp_path, "adaptive_appearance": False})
    config.update({"use_semantics": False})
    with pytest.raises(ConfigError, match="corpus"):
        config.validate()

    corpus = tmp_path / "words.txt"
    corpus.write_text("exit\n", encoding="utf-8")
    config.update({"corpus_paths": [str(corpus)]})
    config.validate()

    config.update({"adaptive_appearance": True})
    with pytest.raises(ConfigError, match="appearance_db"):
        config.validate()
