import json

import pytest

from ajch import constants as C
from ajch.cli import bundled_config
from ajch.config import ConfigError, ExperimentConfig, load_config

BASE = {"schema": 1, "experiment": "hopping", "n_sites": 2, "g_b_khz": 7.5, "kappa_khz": 2.0}


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_units_are_bit_identical(tmp_path):
    a = load_config(write(tmp_path, '{"schema": 1, "experiment": "hopping", "g_b_khz": 7.85, "kappa_khz": 2.12}', "a.cfg"))
    b = load_config(write(tmp_path, '{"schema": 1, "experiment": "hopping", "g_b_hz": 7850, "kappa_hz": 2120.0}', "b.cfg"))
    assert a.g_b == b.g_b
    assert a.kappa == b.kappa
    assert a.g_b == C.TWO_PI * 7850.0


def test_unknown_keys_and_all_problems_reported():
    raw = dict(BASE, gb_khz=7.5, kappa_ghz=1, shots=-1)
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(raw)
    problems = err.value.problems
    assert any("gb_khz" in p for p in problems)
    assert any("kappa_ghz" in p for p in problems)
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(dict(BASE, shots=-1, rabi_drift_fraction=1.5))
    assert len(err.value.problems) == 2


def test_duplicate_frequency_and_missing_schema():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(BASE, g_b_hz=7500))
    raw = dict(BASE)
    del raw["schema"]
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw)


def test_invalid_json(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "{not json"))


def test_geometry_kappa():
    raw = {"schema": 1, "experiment": "eigen", "kappa_from_geometry": True,
           "trap_frequencies_mhz": [3.00, 2.81, 0.11], "g_b_khz": 7.5}
    cfg = ExperimentConfig.from_dict(raw)
    assert cfg.kappa_matrix()[0, 1] / C.TWO_PI == pytest.approx(2153.02, abs=0.01)


def test_derived_objects():
    cfg = load_config(bundled_config("fig3b.cfg"))
    params = cfg.model_params()
    assert params.eta == 0.06
    assert params.g_b == pytest.approx(params.eta * params.omega0_rabi / 2)
    rates = cfg.dephasing_rates()
    assert rates.shape == (2,) and rates[0] > 0
    grid = cfg.time_grid()
    assert grid[0] == 0 and grid[-1] == pytest.approx(1.2e-3) and len(grid) == 61
    assert cfg.resolved_prep_pulses() == ({"kind": "carrier", "ion": 1},)
    json.dumps(cfg.to_dict())


@pytest.mark.parametrize("name", ["fig3a.cfg", "fig3b.cfg", "fig5abc.cfg", "fig5d.cfg", "eigen.cfg"])
def test_bundled_configs_load(name):
    load_config(bundled_config(name))


def test_initial_state_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(BASE, initial_state=[["up", 0]]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(BASE, prep_pulses=[{"kind": "carrier", "ion": 3}]))
