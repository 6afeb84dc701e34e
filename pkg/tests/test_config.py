import logging

import pytest

from skan.config import (
    ConfigError, ExperimentConfig, build_config, coerce, load_config, parse_overrides, parse_snr,
    parse_text,
)


def test_empty_config_has_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("# nothing\n\n")
    cfg = load_config(path)
    assert cfg == ExperimentConfig()
    assert (cfg.ddr, cfg.w, cfg.dr_max, cfg.inh_max, cfg.inh_decay, cfg.T) == (
        1, 10000, 400, 100, 1, 400)
    assert (cfg.dr_init_base, cfg.dr_init_spread) == (100, 100)
    np4 = cfg.neuron_params(4)
    assert (np4.theta_rise, np4.theta_fall) == (160, 400)
    assert cfg.kernel_params().w == 10000 and cfg.warnings() == []


def test_file_values_and_types(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("w = 5000   # smaller kernels\nclamp_peak = false\nsigmas = 0, 0.5\n"
                    "theta_init = 1200\nsnrs = 1:0, 1:3\n")
    cfg = load_config(path)
    assert cfg.w == 5000 and cfg.clamp_peak is False and cfg.sigmas == (0.0, 0.5)
    assert cfg.initial_theta() == 1200 and cfg.snrs == ("1:0", "1:3")


def test_auto_theta_init():
    cfg = ExperimentConfig()
    assert cfg.initial_theta(2) == 15000 and cfg.initial_theta(8) == 60000


def test_unknown_key_named(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("thetaRise = 40\n")
    with pytest.raises(ConfigError, match="thetaRise"):
        load_config(path)


@pytest.mark.parametrize("text", ["w = -5", "T = 0", "w", "w = ten", "clamp_peak = maybe",
                                  "PW = 400", "theta_init = soon", "snrs = 1-2",
                                  "rf_theta_mode = lazy", "p_signal = 2", "= 4"])
def test_bad_values(text):
    with pytest.raises(ConfigError):
        build_config(parse_text(text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_eq5_warning(caplog):
    with caplog.at_level(logging.WARNING):
        cfg = load_config(None, {"PW": 40})
    assert cfg.warnings() and "dr_max=400" in caplog.text


def test_overrides_and_hash():
    ov = parse_overrides(["seed=7", "n_neurons = 3", "sigmas=1,2"])
    assert ov == {"seed": 7, "n_neurons": 3, "sigmas": (1.0, 2.0)}
    with pytest.raises(ConfigError):
        parse_overrides(["seed"])
    with pytest.raises(ConfigError):
        coerce("nosuch", "1")
    a = load_config(None, ov)
    b = load_config(None, dict(ov, out="elsewhere"))
    assert a.config_hash() == b.config_hash() and len(a.config_hash()) == 12
    assert a.config_hash() != load_config(None, {"seed": 8}).config_hash()


def test_dumps_roundtrip():
    cfg = load_config(None, {"sigmas": (0.25, 3.0), "clamp_peak": False, "seed": 4})
    assert build_config(parse_text(cfg.dumps())) == cfg


def test_parse_snr():
    assert parse_snr("1:2") == (1.0, 2.0)
    with pytest.raises(ConfigError):
        parse_snr("0:1")
