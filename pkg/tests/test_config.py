from pathlib import Path

import pytest

from wavecore.config import (AcceleratorConfig, ConfigError, EnergyModel, GiB, MemoryConfig, accelerator_from_dict,
                             load_accelerator, load_energy, load_memory)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_bundled_files_equal_defaults():
    assert load_accelerator(CONFIGS / "wavecore.yaml") == AcceleratorConfig()
    assert load_energy(CONFIGS / "energy.yaml") == EnergyModel()
    assert load_accelerator(None) == AcceleratorConfig()


def test_memory_files():
    derated = load_memory(CONFIGS / "hbm2_derated.yaml")
    assert derated.name == "HBM2" and derated.efficiency == 0.7
    custom = load_memory(CONFIGS / "lpddr4_custom.yaml")
    assert custom.bandwidth == pytest.approx(MemoryConfig.preset("LPDDR4").bandwidth)
    assert custom.capacity == 16 * GiB
    assert load_memory("hbm2x2").name == "HBM2x2"


def test_string_numbers_are_coerced():
    cfg = accelerator_from_dict({"clock_hz": "1e9", "global_buffer_mib": 20})
    assert cfg.clock_hz == 1e9 and cfg.global_buffer == 20 * 2**20
    with pytest.raises(ConfigError):
        accelerator_from_dict({"clock_hz": "fast"})


@pytest.mark.parametrize("raw", [{"clock_mhz": 700}, {"array": {"rows": 4}}, {"cores": 0},
                                 {"global_buffer": 1024}])
def test_bad_accelerator(raw):
    with pytest.raises(ConfigError):
        accelerator_from_dict(raw)


def test_bad_memory_and_energy(tmp_path):
    with pytest.raises(ConfigError):
        MemoryConfig.preset("DDR3")
    with pytest.raises(ConfigError):
        MemoryConfig("x", 1e9, efficiency=1.5)
    with pytest.raises(ConfigError):
        EnergyModel(e_dram=0)
    bad = tmp_path / "bad.yaml"
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_energy(bad)
    bad.write_text("e_mac: [unclosed")
    with pytest.raises(ConfigError):
        load_energy(bad)


def test_gbuf_energy_default_ratio():
    assert EnergyModel(e_dram=80e-12).e_gbuf == pytest.approx(10e-12)
