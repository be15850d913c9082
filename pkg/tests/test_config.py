"""
Unit tests for pipeline configuration, network presets and logging setup.
"""

import logging

import pytest
from pydantic import ValidationError

from config.net_config import (
    DEFAULT_NET,
    NET_PRESETS,
    TRAINABLE_PRESETS,
    NetConfig,
    TrainingConfig,
    get_net_config,
)
from config.observability_config import ObservabilityConfig
from config.pipeline_config import (
    HASHED_FIELDS,
    PathSettings,
    PipelineConfig,
    build_config,
    load_config,
    save_config,
)
from src.errors import UnknownNetConfig, UserError
from src.state import SphereSide


# ============================================================================
# PipelineConfig Tests
# ============================================================================

@pytest.mark.unit
@pytest.mark.fast
class TestPipelineConfig:
    """Test the validated pipeline settings."""

    def test_defaults(self):
        config = PipelineConfig()

        assert config.resolution == 64
        assert config.side == SphereSide.INTERIOR
        assert config.d_schedule == [10.0, 5.0, 0.0]
        assert config.net == DEFAULT_NET
        assert config.contact_tolerance == 0.5

    def test_schedule_from_string(self):
        assert build_config({"d_schedule": "8, 4, 0"}).d_schedule == [8.0, 4.0, 0.0]

    @pytest.mark.parametrize("schedule", ["10,5", "5,10,0", "10,10,0", ""])
    def test_invalid_schedule(self, schedule):
        with pytest.raises(UserError):
            build_config({"d_schedule": schedule})

    def test_resolution_minimum(self):
        with pytest.raises(ValidationError):
            PipelineConfig(resolution=4)

    def test_unknown_net(self):
        with pytest.raises(UserError) as exc_info:
            build_config({"net": "resnet"})

        assert "Unknown network" in str(exc_info.value)

    def test_unknown_key(self):
        with pytest.raises(UserError) as exc_info:
            build_config({"colour": "red"})

        assert "colour" in str(exc_info.value)

    def test_mixed_split(self):
        config = build_config({"side": "mixed", "n_spheres": 9})

        assert (config.n_interior, config.n_exterior) == (5, 4)

    def test_single_side_split(self):
        assert build_config({"side": "exterior", "n_spheres": 8}).n_exterior == 8
        assert build_config({"side": "interior", "n_spheres": 8}).n_exterior == 0

    def test_mixed_needs_two_spheres(self):
        with pytest.raises(UserError):
            build_config({"side": "mixed", "n_spheres": 1})

    def test_overrides_win_and_none_is_ignored(self):
        config = build_config({"resolution": 32, "seed": 1}, {"resolution": 48, "seed": None})

        assert config.resolution == 48
        assert config.seed == 1


@pytest.mark.unit
@pytest.mark.fast
class TestConfigHash:
    """Test the geometry config hash."""

    def test_format(self):
        digest = PipelineConfig().config_hash()

        assert len(digest) == 16
        int(digest, 16)

    def test_stable(self):
        assert PipelineConfig().config_hash() == PipelineConfig().config_hash()

    @pytest.mark.parametrize("field, value", [
        ("resolution", 32),
        ("n_spheres", 128),
        ("side", SphereSide.EXTERIOR),
        ("d_schedule", [8.0, 4.0, 0.0]),
        ("scale_d", False),
        ("contact_tolerance", 0.25),
    ])
    def test_geometry_fields_change_hash(self, field, value):
        assert field in HASHED_FIELDS
        assert build_config({field: value}).config_hash() != PipelineConfig().config_hash()

    @pytest.mark.parametrize("field, value", [("seed", 9), ("net", "t2-512"), ("epochs", 3), ("workers", 4)])
    def test_training_fields_keep_hash(self, field, value):
        assert build_config({field: value}).config_hash() == PipelineConfig().config_hash()

    def test_hash_tag(self):
        config = PipelineConfig()

        assert config.hash_tag() == int(config.config_hash(), 16)
        assert config.hash_tag() < 2 ** 64


@pytest.mark.unit
class TestConfigFiles:
    """Test KEY=VALUE config files."""

    def test_load(self, tmp_path):
        path = tmp_path / "desk.env"
        path.write_text("RESOLUTION=32\nN_SPHERES=16\nSIDE=exterior\nD_SCHEDULE=10,5,0\n", encoding="utf-8")

        config = load_config(path)

        assert config.resolution == 32
        assert config.n_spheres == 16
        assert config.side == SphereSide.EXTERIOR

    def test_save_then_load(self, tmp_path, toy_config):
        path = save_config(toy_config, tmp_path / "toy.env")

        assert path.read_text(encoding="utf-8").startswith(f"# config_hash={toy_config.config_hash()}")
        assert load_config(path) == toy_config

    def test_load_with_overrides(self, tmp_path):
        path = tmp_path / "desk.env"
        path.write_text("RESOLUTION=32\n", encoding="utf-8")

        assert load_config(path, {"resolution": 16}).resolution == 16

    def test_missing_file(self, tmp_path):
        with pytest.raises(UserError):
            load_config(tmp_path / "absent.env")

    def test_paths_follow_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("INSPHERE_CACHE_DIR", str(tmp_path / "elsewhere"))

        assert PathSettings.cache_dir() == tmp_path / "elsewhere"
        assert PipelineConfig().effective_cache_dir() == tmp_path / "elsewhere"
        assert PipelineConfig(cache_dir=tmp_path / "explicit").effective_cache_dir() == tmp_path / "explicit"


# ============================================================================
# Network Preset Tests
# ============================================================================

@pytest.mark.unit
@pytest.mark.fast
class TestNetConfig:
    """Test architecture presets."""

    def test_presets(self):
        assert set(TRAINABLE_PRESETS) < set(NET_PRESETS)
        assert get_net_config("t2-1024").mlp_dims == [64, 128, 1024]
        assert get_net_config("t2-512").fc_dims == [256]
        assert get_net_config("t2-256").fc_dims == []
        assert get_net_config("pointnet-vanilla").input_dim == 3

    def test_class_count(self):
        config = get_net_config("t2-256", k=10)

        assert config.k == 10
        assert NET_PRESETS["t2-256"].k == 40

    def test_unknown_preset(self):
        with pytest.raises(UnknownNetConfig) as exc_info:
            get_net_config("t3-2048")

        assert exc_info.value.exit_code == 1

    def test_invalid_layout(self):
        with pytest.raises(UnknownNetConfig):
            NetConfig(name="empty", mlp_dims=[])
        with pytest.raises(UnknownNetConfig):
            NetConfig(name="one-class", mlp_dims=[8], k=1)

    def test_json(self):
        config = get_net_config("t2-512", k=7)

        assert NetConfig.from_json(config.to_json()) == config
        assert TrainingConfig.from_json(TrainingConfig(epochs=3).to_json()).epochs == 3

    def test_training_defaults(self):
        training = TrainingConfig()

        assert training.learning_rate == 1e-3
        assert (training.decay_rate, training.decay_step) == (0.7, 20)
        assert training.batch_size == 32


@pytest.mark.unit
class TestObservability:
    """Test logging setup."""

    def test_setup_logging_sets_level(self):
        ObservabilityConfig.setup_logging("DEBUG")
        assert logging.getLogger().level == logging.DEBUG

        ObservabilityConfig.setup_logging("WARNING")
        assert logging.getLogger().level == logging.WARNING

    def test_single_handler(self):
        root = logging.getLogger()
        ObservabilityConfig.setup_logging("INFO")
        count = len(root.handlers)

        ObservabilityConfig.setup_logging("INFO")

        assert len(root.handlers) == count
