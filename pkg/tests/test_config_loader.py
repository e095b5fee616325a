"""Tests for the TOML experiment configuration."""

import numpy as np
import pytest

import config
from services.errors import ConfigInvalid
from utils.config_loader import config_from_dict, load_experiment_config

MINIMAL = {
    "lattice": {"basis": [[1.0]]},
    "symbol": {"p": 2, "m": 1, "n": 1, "terms": [{"beta": [2], "entries": [[1.0]]}]},
    "coefficient": {"m": 1, "terms": [{"freq": [0], "entries": [[2.0]]}]},
}


def _with(section, **values):
    data = {k: dict(v) for k, v in MINIMAL.items()}
    data.setdefault(section, {}).update(values)
    return data


def test_bundled_configs():
    for name in ("scalar_d1", "generic_d2", "constant_d1"):
        cfg = load_experiment_config(config.CONFIGS_DIR / f"{name}.toml")
        assert cfg.run.config_id == name.replace("_", "-")


def test_complex_entries(generic_cfg):
    freq, mat = generic_cfg.coefficient.terms[1]
    assert freq == (1, 0)
    assert mat[0, 1] == 0.15j
    assert generic_cfg.coefficient.complete_hermitian


def test_defaults():
    cfg = config_from_dict(MINIMAL)
    assert cfg.dimension == 1
    assert cfg.truncation.cell == 12.0
    assert cfg.resolve_s() == 5.0
    assert cfg.resolve_s("2p+2") == 6.0
    assert cfg.resolve_s("p+1") == 3.0
    assert cfg.resolve_s(2.5) == 2.5
    np.testing.assert_allclose(cfg.eps_ladder(), 0.25 / 2.0 ** np.arange(6))


@pytest.mark.parametrize("data", [
    {k: v for k, v in MINIMAL.items() if k != "lattice"},
    _with("lattice", basis=[[1.0, 0.0]]),
    _with("symbol", p=1),
    _with("symbol", terms=[{"beta": [3], "entries": [[1.0]]}]),
    _with("symbol", terms=[{"beta": [2], "entries": [[[1.0, 2.0, 3.0]]]}]),
    _with("coefficient", m=2),
    _with("coefficient", terms=[]),
    _with("rates", eps_ratio=1.0),
    _with("rates", taus=[]),
    _with("rates", eps_count=1),
    _with("evolution", eps_list=[0.1, 0.2]),
    _with("evolution", profile="square"),
    _with("interp", s_list=[-1.0]),
])
def test_invalid(data):
    with pytest.raises(ConfigInvalid):
        config_from_dict(data)


def test_unknown_s():
    cfg = config_from_dict(_with("rates", s="3p"))
    with pytest.raises(ConfigInvalid):
        cfg.resolve_s()


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_experiment_config(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[lattice\nbasis = 1")
    with pytest.raises(ConfigInvalid):
        load_experiment_config(bad)


def test_process_settings_valid():
    assert config.validate_config() == []
