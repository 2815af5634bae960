import pytest

from scherk.config import RunConfig, config_from_dict, parse_config, replace, write_config
from scherk.errors import ConfigError


def test_minimal_file_gets_defaults(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("n = 3\nm = 2\neps = 0.1\n", encoding="utf-8")
    cfg = parse_config(path)
    assert cfg.ell_max == 6 and cfg.delta == 0.0 and cfg.threads == 1
    assert abs(cfg.resolved_rho() - 0.443) < 1e-3
    assert cfg.resolved_nu() == -1.0


def test_round_trip(tmp_path):
    cfg = config_from_dict({"n": 4, "m": 2, "eps": 0.05, "rho": 0.3, "nu": -0.5,
                            "lattice": {"diag": [1.0, 2.0]}, "grid": {"outer_h": 0.04},
                            "solver": {"tol": 1e-9}, "output": {"dir": "o"}})
    path = tmp_path / "c.toml"
    write_config(cfg, path)
    assert parse_config(path) == cfg


@pytest.mark.parametrize("data,message", [
    ({"eps": 0.5}, "eps must be < rho"),
    ({"nu": 0.5}, "nu must lie in"),
    ({"n": 2, "m": 1}, "n must be an integer >= 3"),
    ({"m": 3}, "m must be an integer"),
    ({"delta": 0.7}, "delta must lie in"),
    ({"bogus": 1}, "unknown key"),
    ({"solver": {"threads": 0}}, "threads must be a positive integer"),
    ({"lattice": {"diag": [1.0]}}, "lattice has dimension 1"),
])
def test_validation_messages(data, message):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert message in str(info.value)


def test_errors_are_aggregated():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"eps": -1.0, "delta": 3.0, "solver": {"kappa": 0.0}})
    text = str(info.value)
    assert "eps must be > 0" in text and "delta" in text and "kappa" in text


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "none.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("n = = 3", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_replace_validates():
    cfg = RunConfig().validate()
    assert replace(cfg, eps=0.05).eps == 0.05
    with pytest.raises(ConfigError):
        replace(cfg, eps=1.0)
