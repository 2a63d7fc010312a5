import json

import pytest

from causalcpd.utils.config import Configuration, get_config, normalize_key, resolve_threads, set_config
from causalcpd.utils.error_handler import ConfigurationError


def test_defaults():
    config = Configuration.get_instance()
    assert config.get("nw") == 50
    assert config.get("alpha-level") == 0.01
    assert config.source("nw") == "default"


def test_normalize_key():
    assert normalize_key("--tau-ub") == "tau_ub"
    assert normalize_key(" Alpha_Level ") == "alpha_level"


def test_environment_overrides_defaults(monkeypatch):
    monkeypatch.setenv("CAUSAL_CPD_NW", "80")
    monkeypatch.setenv("CAUSAL_CPD_REFINE", "yes")
    monkeypatch.setenv("CAUSAL_CPD_ALPHA", "not-a-number")
    Configuration.reset()
    assert get_config("nw") == 80
    assert get_config("refine") is True
    assert get_config("alpha") == 0.1
    assert Configuration.get_instance().source("nw") == "env"


def test_file_overrides_environment_and_flags_override_file(tmp_path, monkeypatch):
    monkeypatch.setenv("CAUSAL_CPD_NW", "80")
    Configuration.reset()
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"nw": 120, "tau-ub": "3", "t": [2000, 6000]}), encoding="utf-8")
    loaded = Configuration.get_instance().load_file(path)
    assert loaded == {"nw": 120, "tau_ub": 3, "t": "2000,6000"}
    assert get_config("nw") == 120
    assert Configuration.get_instance().source("tau_ub") == "file"

    set_config("nw", 30)
    assert get_config("nw") == 30
    assert Configuration.get_instance().source("nw") == "flag"


def test_manifest_config_section_is_accepted(tmp_path):
    path = tmp_path / "detect-manifest.json"
    path.write_text(json.dumps({"command": "detect", "config": {"nw": 70, "estimator": "kernel"}}), encoding="utf-8")
    Configuration.get_instance().load_file(path)
    assert get_config("nw") == 70
    assert get_config("estimator") == "kernel"


@pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
def test_bad_config_files(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigurationError):
        Configuration.get_instance().load_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        Configuration.get_instance().load_file(tmp_path / "absent.json")


def test_resolve_threads(monkeypatch):
    assert resolve_threads() == 1
    assert resolve_threads(4) == 4
    assert resolve_threads(0) == 1
    monkeypatch.setenv("CAUSAL_CPD_THREADS", "3")
    Configuration.reset()
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
