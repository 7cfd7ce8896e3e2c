"""設定檔解析."""

import pytest

from src.config import EXACT, DEFAULT_DETUNINGS_MHZ, RunConfig, load_run_config, parse_config_mapping
from src.errors import ConfigError

CONFIG_TEXT = """\
# Rabi 模擬，64 格 × 10 ns
tmf_model = rabi
omega_c_mhz = 31.5
dt_ns = 10
n_bins = 64
detunings_mhz = -10,-5,0,3,8,13,18,23
n_samples = exact
seed = 42
labels = OD=8, Omega_p=2pi*31.5MHz
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(CONFIG_TEXT, encoding="utf-8")
    return path


class TestParse:
    def test_file(self, config_file):
        config = load_run_config(config_file)
        assert config.tmf_model == "rabi"
        assert config.n_bins == 64
        assert config.detunings_mhz == DEFAULT_DETUNINGS_MHZ
        assert config.is_exact
        assert config.seed == 42
        assert config.labels.startswith("OD=8")

    def test_defaults(self):
        config = load_run_config()
        assert config == RunConfig()
        assert config.n_samples == EXACT
        assert config.m is None
        assert config.eta == 1.0

    def test_overrides_win(self, config_file):
        config = load_run_config(config_file, {"seed": "7", "n_samples": "5000", "psd": "true"})
        assert config.seed == 7
        assert config.n_samples == 5000
        assert config.psd

    def test_m(self):
        assert parse_config_mapping({"m": "auto"}) == {"m": None}
        assert parse_config_mapping({"m": "12"}) == {"m": 12}

    def test_mapping_round_trip(self, config_file):
        config = load_run_config(config_file)
        assert load_run_config(None, config.to_mapping()) == config


class TestErrors:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="detuning"):
            parse_config_mapping({"detuning": "1,2"})

    @pytest.mark.parametrize("key, value", [
        ("n_samples", "1"),
        ("n_samples", "lots"),
        ("seed", "-1"),
        ("tmf_model", "gaussian"),
        ("angular_convention", "hz"),
        ("psd", "maybe"),
        ("detunings_mhz", ","),
    ])
    def test_bad_value(self, key, value):
        with pytest.raises(ConfigError):
            parse_config_mapping({key: value})

    @pytest.mark.parametrize("overrides", [
        {"eta": "1.5"},
        {"dt_ns": "0"},
        {"n_bins": "1"},
        {"phase_threshold": "-0.1"},
        {"tmf_model": "tabulated"},
    ])
    def test_invalid_combination(self, overrides):
        with pytest.raises(ConfigError):
            load_run_config(None, overrides)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "missing.conf")
