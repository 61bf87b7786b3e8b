import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wannierdot.device import (KB_MEV_PER_K, ConfigError, DeviceConfig, NumericsConfig, TaskConfig, derive_scales,
                               format_config, load_config, parse_config_text, validate_config)


def test_reference_scales():
    s = derive_scales(DeviceConfig())
    assert s.e_lambda == pytest.approx(0.0569, rel=2e-3)
    assert s.coulomb_scale == pytest.approx(1.108, rel=1e-3)


def test_thermal_energy_at_10mk():
    assert derive_scales(DeviceConfig()).thermal_energy(0.01) == pytest.approx(0.00086, rel=5e-3)
    assert KB_MEV_PER_K * 0.01 == pytest.approx(8.617e-4)


@given(st.floats(10, 1000), st.floats(0.01, 1.0), st.floats(1, 30))
def test_scale_covariance(lam, mass, eps_r):
    base = derive_scales(DeviceConfig(lambda_nm=lam, mass_ratio=mass, epsilon_r=eps_r))
    double = derive_scales(DeviceConfig(lambda_nm=2 * lam, mass_ratio=mass, epsilon_r=eps_r))
    assert double.e_lambda == pytest.approx(base.e_lambda / 4, rel=1e-12)
    assert double.coulomb_scale == pytest.approx(base.coulomb_scale / 2, rel=1e-12)


@pytest.mark.parametrize("field, value", [
    ("lambda_nm", 0.0), ("lambda_nm", -5.0), ("v0_mev", -1.0), ("mass_ratio", 0.0), ("epsilon_r", 0.0),
    ("depth_nm", 0.0), ("lambda_nm", math.nan),
])
def test_invalid_device_names_field(field, value):
    with pytest.raises(ConfigError) as info:
        validate_config(DeviceConfig(**{field: value}))
    assert any(e.startswith(f"device.{field}") for e in info.value.errors)


@pytest.mark.parametrize("field, value", [
    ("k_grid", 7), ("q_angular", 20), ("plane_wave_cutoff", 3), ("orbital_cutoff", 0), ("eigensolver_tol", 0.0),
])
def test_invalid_numerics_names_field(field, value):
    with pytest.raises(ConfigError) as info:
        validate_config(None, NumericsConfig(**{field: value}))
    assert any(e.startswith(f"numerics.{field}") for e in info.value.errors)


def test_all_errors_reported_together():
    with pytest.raises(ConfigError) as info:
        validate_config({"lambda_nm": -1, "v0_mev": -1})
    assert len(info.value.errors) == 2


def test_infinite_depth_means_bare():
    cfg, _ = validate_config({"depth_nm": math.inf})
    assert math.isinf(cfg.depth_nm)


def test_defaults_round_trip():
    cfg, num, task = load_config()
    assert (cfg, num, task) == (DeviceConfig(), NumericsConfig(), TaskConfig())
    again = load_config_text(format_config(cfg, num, task))
    assert again == (cfg, num, task)


def load_config_text(text, overrides=()):
    from wannierdot.device import apply_overrides, build_configs
    return build_configs(apply_overrides(parse_config_text(text), overrides))


def test_grammar_comments_lists_and_ranges():
    cfg, num, task = load_config_text(
        "# header\ndevice.v0_mev = 5.4  # inline\nnumerics.q_grid = 64\n"
        "task.nb = 0, 2, 6\ntask.sweep_v0 = 0.5:6:12\n")
    assert cfg.v0_mev == 5.4 and num.q_grid == 64
    assert task.nb == (0, 2, 6)
    assert len(task.sweep_v0) == 12 and task.sweep_v0[0] == 0.5 and task.sweep_v0[-1] == pytest.approx(6.0)


def test_overrides_last_wins():
    cfg, _, _ = load_config_text("device.v0_mev = 1.0\n", ["device.v0_mev=2.0", "device.v0_mev=3.0"])
    assert cfg.v0_mev == 3.0


@pytest.mark.parametrize("text", ["device.nope = 1\n", "gadget.v0_mev = 1\n", "v0_mev = 1\n", "device.v0_mev\n",
                                  "device.v0_mev = abc\n"])
def test_bad_config_text(text):
    with pytest.raises(ConfigError):
        load_config_text(text)


@settings(max_examples=30)
@given(st.floats(0.0, 20.0, allow_nan=False), st.integers(8, 40).map(lambda n: 2 * n))
def test_format_parse_round_trip(v0, k_grid):
    cfg, num, task = DeviceConfig(v0_mev=v0), NumericsConfig(k_grid=k_grid), TaskConfig()
    assert load_config_text(format_config(cfg, num, task)) == (cfg, num, task)
