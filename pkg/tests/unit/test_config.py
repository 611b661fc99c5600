"""Tests for run configuration parsing."""

import json
from pathlib import Path

import pytest

from mfeit.config import (
    DEFAULT_FREQUENCIES_HZ,
    DetectionConfig,
    JumpStudyConfig,
    PcaConfig,
    RunConfig,
    SweepConfig,
    apply_overrides,
    load_run_config,
    parse_run_config,
)
from mfeit.errors import ConfigError


@pytest.fixture
def config_file(tmp_path):
    phantom = {"domain_radius": 1.0, "d0": 0.1, "disks": [{"center": [0.2, 0.1], "radius": 0.1}]}
    (tmp_path / "phantom.json").write_text(json.dumps(phantom))
    data = {
        "phantom_path": "phantom.json",
        "sweep": {"frequencies_hz": [1e3, 5e5], "snr_db": 60.0, "n_electrodes": 8},
        "mesh": {"h": 0.1},
        "detection": {"direction": [0.0, 2.0]},
        "output_dir": "out",
        "seed": 7,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data))
    return path


class TestParseRunConfig:
    """Test suite for parse_run_config."""

    def test_defaults(self):
        config = parse_run_config({"phantom": "homogeneous"})
        assert config.sweep.frequencies_hz == DEFAULT_FREQUENCIES_HZ
        assert config.mesh.h == 0.05
        assert config.detection.sign == "plus"
        assert config.model == "zero_thickness"
        assert config.build_phantom().is_homogeneous

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown configuration keys"):
            parse_run_config({"phantom": "homogeneous", "frequency": 1e3})

    def test_unknown_section_key(self):
        with pytest.raises(ConfigError, match="'mesh'"):
            parse_run_config({"phantom": "homogeneous", "mesh": {"size": 0.1}})

    def test_section_must_be_object(self):
        with pytest.raises(ConfigError):
            parse_run_config({"phantom": "homogeneous", "pca": [2]})

    def test_phantom_sources_are_exclusive(self):
        with pytest.raises(ConfigError):
            parse_run_config({"phantom": "homogeneous", "phantom_path": "p.json"})
        with pytest.raises(ConfigError):
            parse_run_config({}).phantom_spec()
        with pytest.raises(ConfigError):
            parse_run_config({"phantom": "nothing"}).phantom_spec()

    def test_unknown_model(self):
        with pytest.raises(ConfigError):
            parse_run_config({"phantom": "homogeneous", "model": "thick"})

    def test_relative_paths(self, tmp_path):
        config = parse_run_config({"phantom_path": "a/p.json", "output_dir": "results"}, tmp_path)
        assert config.phantom_path == (tmp_path / "a" / "p.json").resolve()
        assert config.output_dir == (tmp_path / "results").resolve()
        with pytest.raises(ConfigError):
            config.phantom_spec()


class TestSections:
    """Test suite for the individual sections."""

    @pytest.mark.parametrize("freqs", [(), (0.0,), (2.0e6,), (1e3, 1e3)])
    def test_sweep_frequencies(self, freqs):
        with pytest.raises(ConfigError):
            SweepConfig(frequencies_hz=freqs)

    def test_detection_direction_is_normalized(self):
        assert DetectionConfig(direction=(3.0, 4.0)).direction == pytest.approx((0.6, 0.8))
        with pytest.raises(ConfigError):
            DetectionConfig(direction=(0.0, 0.0))
        with pytest.raises(ConfigError):
            DetectionConfig(sign="both")

    def test_pole_config(self):
        poles = DetectionConfig(n_segments=1, n_disks=2, tolerance=1e-3).pole_config()
        assert (poles.n_segments, poles.n_disks, poles.tolerance) == (1, 2, 1e-3)

    def test_pca(self):
        assert PcaConfig().mode == "amplitude"
        assert PcaConfig(mode="average").mode == "average"
        with pytest.raises(ConfigError):
            PcaConfig(n_components=0)
        with pytest.raises(ConfigError):
            PcaConfig(mode="median")

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"deltas": (1e-2, 5e-3)},
            {"deltas": (1e-2, 1e-2, 5e-3)},
            {"frequencies_hz": ()},
            {"segment_length": 1.8},
            {"segment_length": 0.0},
        ],
    )
    def test_jump_study(self, kwargs):
        with pytest.raises(ConfigError):
            JumpStudyConfig(**kwargs)

    def test_jump_study_materials(self):
        assert JumpStudyConfig().material_spec.sigma_c == 0.05


class TestLoadRunConfig:
    """Test suite for load_run_config and overrides."""

    def test_load(self, config_file):
        config = load_run_config(config_file)
        assert config.sweep.frequencies_hz == (1e3, 5e5)
        assert config.sweep.n_electrodes == 8
        assert config.detection.direction == pytest.approx((0.0, 1.0))
        assert config.output_dir == config_file.parent.resolve() / "out"
        assert config.noise_seed == 7
        assert len(config.build_phantom().disks) == 1

    def test_overrides(self, config_file, tmp_path):
        config = load_run_config(config_file, out=tmp_path / "other", seed=11, sign="minus")
        assert config.output_dir == (tmp_path / "other").resolve()
        assert config.seed == 11
        assert config.noise_seed == 11
        assert config.detection.sign == "minus"

    def test_none_overrides_keep_values(self, config_file):
        config = load_run_config(config_file)
        assert apply_overrides(config) == config

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            load_run_config(tmp_path / "missing.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_run_config(path)

    def test_run_config_is_frozen(self):
        config = RunConfig(phantom="homogeneous")
        with pytest.raises(AttributeError):
            config.seed = 3  # type: ignore[misc]
        assert isinstance(config.output_dir, Path)
